import sys

from randlat.cli import main

sys.exit(main())
