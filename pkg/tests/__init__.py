# -*- coding: utf-8 -*-
"""Initialize the tests package."""
