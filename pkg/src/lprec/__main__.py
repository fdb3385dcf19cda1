from lprec.cli import main

main()
