import sys

from mwlab.cli import main

sys.exit(main())
