from datetime import date, timedelta

import pytest

from marketeco.panel import MarketPanel, SnapshotRow, load_panel

WEEK0 = date(2015, 1, 4)


def week(k: int) -> date:
    return WEEK0 + timedelta(days=7 * k)


def panel_from(table: "dict[str, list[float | None]]") -> MarketPanel:
    """Build a panel from {asset: [cap per week or None]}."""
    rows = []
    for asset, caps in table.items():
        for k, cap in enumerate(caps):
            if cap is not None:
                rows.append(SnapshotRow(week(k), asset, asset.upper(), float(cap)))
    return load_panel(rows)


@pytest.fixture
def small_panel() -> MarketPanel:
    return panel_from(
        {
            "a": [10, 12, 14, 16, 18, 20],
            "b": [5, 5, None, 5, 5, 5],
            "c": [None, 2, 3, 4, None, None],
            "d": [100, 90, 80, 70, 60, 50],
        }
    )
