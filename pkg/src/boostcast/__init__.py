"""Daily OHLCV forecasting with engineered features and boosted trees."""

__version__ = "0.1.0"
