import sys

from automon.cli import main

sys.exit(main())
