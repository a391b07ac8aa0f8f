#!/usr/bin/env python3
from nodewrap.demo.turtle_sim import main

if __name__ == "__main__":
    main()
