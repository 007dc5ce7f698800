import sys

from l0solve.cli import main

sys.exit(main())
