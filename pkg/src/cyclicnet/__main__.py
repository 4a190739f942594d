import sys

from cyclicnet.harness.cli import main

sys.exit(main())
