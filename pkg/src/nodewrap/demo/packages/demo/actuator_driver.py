#!/usr/bin/env python3
from nodewrap.demo.actuator_driver import main

if __name__ == "__main__":
    main()
