import sys

from vaxctl.cli import main

sys.exit(main())
