# -*- coding: utf-8 -*-
"""
    Setup file for omplab.
    Use setup.cfg to configure your project.
"""
from setuptools import setup

if __name__ == "__main__":
    setup()
