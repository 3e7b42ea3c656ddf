# -*- coding: utf-8 -*-
"""
Finger-vein presentation attack detection toolkit
"""

__version__ = "0.1.0"
