# Only the entry points used across the package and by scripts
from .lab_config import LabSettings, load_settings, create_default_config, resolve_threads
from .sobolev_core import Grid, GridFunction, make_grid, grid_function, sobolev_norm, dual_norm, capacity
from .measures import PairMeasure, lebesgue, dirac, density_measure, product_measure
from .cut_norm import cut_norm_exact_p2, cut_norm_alternating, cut_norm_bruteforce, graphon_cut_norm
from .functionals import Energy, make_pair_integrand, make_local_integrand, total_energy
from .gamma_lab import (continuity_experiment, semicontinuity_experiment, gamma_experiment, mosco_check,
                        minimize_energy, example_fixture)
from .report_exporter import ReportExporter, export_report, load_report
