import sys

from pairedprobit.cli import main

sys.exit(main())
