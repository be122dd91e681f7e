import sys

from gaborpoint.cli import main

sys.exit(main())
