import sys

from fraudbench.cli import main

sys.exit(main())
