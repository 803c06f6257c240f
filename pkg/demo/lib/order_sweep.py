"""
Order Sweep Module - Reduce and certify a range of orders.

This module allows:
- Truncation of one balanced realization at many orders
- Preservation certificates and tail coefficients per order
- Error handling per order (inadmissible orders are skipped, not fatal)
- Summary report at the end
"""

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import sys
sys.path.insert(0, str(Path(__file__).parent.parent.parent / "src"))

from analyzers.certificates import preservation_certificates
from balancing.balanced_truncation import BalancedRealization, tail_coefficient, truncate
from core.config import BalancingConfig
from core.errors import LQGBTError, OrderSelectionError


@dataclass
class OrderStatus:
    """Status of a single reduction order."""
    r: int
    status: str  # "pending", "certified", "failed", "skipped", "error"
    tail_coefficient: float = 0.0
    closed_loop_abscissa: float | None = None
    detectable: bool | None = None
    margins: tuple[float, float] | None = None
    error_message: str | None = None
    duration_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "status": self.status,
            "tail_coefficient": self.tail_coefficient,
            "closed_loop_abscissa": self.closed_loop_abscissa,
            "detectable": self.detectable,
            "margins": list(self.margins) if self.margins else None,
            "error_message": self.error_message,
        }


@dataclass
class SweepResult:
    """Result of an order sweep."""
    statuses: list[OrderStatus] = field(default_factory=list)
    total_duration_seconds: float = 0.0

    @property
    def certified_count(self) -> int:
        return sum(1 for s in self.statuses if s.status == "certified")

    @property
    def failed_count(self) -> int:
        return sum(1 for s in self.statuses if s.status in ("failed", "error"))

    @property
    def skipped_count(self) -> int:
        return sum(1 for s in self.statuses if s.status == "skipped")

    @property
    def total_count(self) -> int:
        return len(self.statuses)

    def admissible_orders(self) -> list[int]:
        return [s.r for s in self.statuses if s.status != "skipped"]

    def is_fully_certified(self) -> bool:
        return self.failed_count == 0


class OrderSweep:
    """
    Truncates a balanced realization at each requested order and certifies
    the reduced model, with a progress line per order.
    """

    def __init__(
        self,
        config: BalancingConfig | None = None,
        print_func: Callable[[str], None] = print
    ):
        self.config = config or BalancingConfig()
        self.print_func = print_func

    def progress_bar(self, current: int, total: int, width: int = 40) -> str:
        progress = current / total if total > 0 else 0
        filled = int(width * progress)
        return f"[{'█' * filled}{'░' * (width - filled)}] {int(progress * 100)}%"

    def print_status_line(self, status: OrderStatus) -> None:
        icons = {"certified": "✅", "failed": "❌", "skipped": "⏭️", "error": "⚠️"}
        detail = f"tail {status.tail_coefficient:.3e}"
        if status.closed_loop_abscissa is not None:
            detail += f"  abscissa {status.closed_loop_abscissa:+.3e}"
        self.print_func(f"  {icons.get(status.status, '❓')} r={status.r:<3d} {status.status:<10s} {detail}")

    def run(self, bal: BalancedRealization, orders: list[int]) -> SweepResult:
        """
        Certify every order in ``orders``.

        Args:
            bal: balanced realization of the full model
            orders: reduction orders to try

        Returns:
            SweepResult with one status per order
        """
        result = SweepResult(statuses=[OrderStatus(r=r, status="pending") for r in orders])
        start = time.perf_counter()

        for i, status in enumerate(result.statuses):
            order_start = time.perf_counter()
            status.tail_coefficient = tail_coefficient(bal.sigma, status.r)
            try:
                reduced = truncate(bal, status.r, self.config.gap_tol)
                certificate = preservation_certificates(bal, reduced, self.config)
                status.closed_loop_abscissa = certificate.reduced_closed_loop.abscissa
                status.detectable = certificate.reduced_detectable
                status.margins = certificate.typeII_margins
                status.status = "certified" if certificate.passed else "failed"
            except OrderSelectionError as e:
                status.status = "skipped"
                status.error_message = str(e)
            except LQGBTError as e:
                status.status = "error"
                status.error_message = str(e)
            status.duration_seconds = time.perf_counter() - order_start
            self.print_status_line(status)
            self.print_func(f"  {self.progress_bar(i + 1, len(orders))}")

        result.total_duration_seconds = time.perf_counter() - start
        return result

    def print_summary(self, result: SweepResult) -> None:
        self.print_func(f"""
╔══════════════════════════════════════════════════════════════╗
║                       ORDER SWEEP SUMMARY                    ║
╠══════════════════════════════════════════════════════════════╣
║   ✅ Certified: {result.certified_count:3d}                                          ║
║   ❌ Failed:    {result.failed_count:3d}                                          ║
║   ⏭️  Skipped:   {result.skipped_count:3d}                                          ║
║   ⏱️  Time:      {result.total_duration_seconds:6.1f}s                                     ║
╚══════════════════════════════════════════════════════════════╝
""")
        for status in result.statuses:
            if status.status in ("failed", "error"):
                self.print_func(f"   • r={status.r}: {status.error_message or 'certificate failed'}")


def create_order_sweep(
    config: BalancingConfig | None = None,
    print_func: Callable[[str], None] = print
) -> OrderSweep:
    """Factory function to create an OrderSweep."""
    return OrderSweep(config, print_func)
