from lfpe.cli import main

main()
