import sys

from pwdyn.cli import main

sys.exit(main())
