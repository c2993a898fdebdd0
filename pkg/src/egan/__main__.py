import sys

from egan.cli import main

sys.exit(main())
