import sys

from uavcoverage.cli import main

sys.exit(main())
