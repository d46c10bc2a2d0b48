"""Worked instances from the two illustrative figures (positions rebuilt from printed gaps)."""

from .core import Instance

# gaps 1, 4, 2, 1 on an 8 km segment
FIG1 = Instance(8.0, (0.0, 1.0, 5.0, 7.0, 8.0), "LHLHL")

# gaps 1, 4, 1.5, 1.5 on an 8 km segment
FIG2 = Instance(8.0, (0.0, 1.0, 5.0, 6.5, 8.0), "LLHHH")

FIGURES = {"fig1": FIG1, "fig2": FIG2}
