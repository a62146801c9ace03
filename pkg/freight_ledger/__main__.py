import sys

from freight_ledger.cli import main

sys.exit(main())
