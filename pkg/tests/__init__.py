"""
Test suite for smerf.

Unit, CLI and acceptance tests for the smerf library.
"""
