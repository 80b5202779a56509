import sys

from motiondistill.main import main

sys.exit(main())
