"""Reference fill-mask server for the review-request QA wire protocol."""

__version__ = "0.1.0"
