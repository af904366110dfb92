# This script makes it possible to invoke rppgbench with 'python3 -m rppgbench'
from rppgbench.cli import main

main()
