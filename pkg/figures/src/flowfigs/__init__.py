"""Read-only consumers of the solver harness CSV outputs.

Time-series files carry the columns
``n,t,kinetic_energy,div_norm,E,D,identity_residual,load_pairing``;
sweep summaries carry
``gamma,alpha,avg_div_sq,final_div,rate_avg,rate_final,blowup_step``.
These scripts plot the former and render the latter as a Markdown table,
recomputing decay rates but no other physics.
"""

from .plots import PlotSpec, plot_timeseries
from .tables import render_table1

__all__ = ["PlotSpec", "plot_timeseries", "render_table1"]

__version__ = "0.1.0"
