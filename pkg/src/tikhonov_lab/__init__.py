"""Tikhonov regularization with general similarity and penalty terms."""
