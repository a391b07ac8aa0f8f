#!/usr/bin/env python3
from nodewrap.demo.goal_seeker import main

if __name__ == "__main__":
    main()
