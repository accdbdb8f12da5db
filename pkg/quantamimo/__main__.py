import sys

from quantamimo.cli import main

sys.exit(main())
