"""Optical time-of-flight proximity/contact/force sensor simulator."""

__version__ = "0.1.0"
