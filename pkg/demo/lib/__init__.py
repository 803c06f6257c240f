"""
Demo Library - Helpers for the reproduction scripts.

Modules:
- order_sweep: Reduction and certification over a range of orders
"""

from .order_sweep import OrderStatus, OrderSweep, SweepResult, create_order_sweep

__all__ = [
    "OrderStatus",
    "OrderSweep",
    "SweepResult",
    "create_order_sweep",
]
