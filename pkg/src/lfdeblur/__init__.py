"""Motion-blur synthesis and recurrent deblurring for 4D light fields."""

__version__ = "0.1.0"
