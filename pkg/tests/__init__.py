"""Test suites for rabitherm services and the command line"""
