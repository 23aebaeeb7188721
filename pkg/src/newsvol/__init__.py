"""Next-day direction of crude-oil realized volatility from news features."""

__version__ = "0.1.0"
