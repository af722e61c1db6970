import sys

from hivecote.experiments import main

sys.exit(main())
