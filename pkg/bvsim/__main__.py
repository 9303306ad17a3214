import sys
from bvsim.cli import main

sys.exit(main())
