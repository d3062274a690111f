"""python -m bmdsnet"""

from bmdsnet.main import main

main()
