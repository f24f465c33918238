"""Shared exception base.

Modules define their own exception types; everything raised by this package
derives from YardError so callers can catch broadly at process boundaries.
"""


class YardError(Exception):
    pass
