"""BMDS-Net desk-scale segmentation pipeline."""

__version__ = "1.0.0"
