import sys

from vdplate.cli import main

sys.exit(main())
