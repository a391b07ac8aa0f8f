#!/usr/bin/env python3
from nodewrap.demo.counter_pub import main

if __name__ == "__main__":
    main()
