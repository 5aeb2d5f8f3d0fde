import os
import json
import logging
from datetime import datetime
from typing import Dict, Any, Optional

import jsonschema
import numpy as np

from .report_utils import ConvergenceReport
from .schemas import REPORT_SCHEMA

logger = logging.getLogger(__name__)

REPORT_VERSION = '1.0'
CSV_FLOAT_FORMAT = '%.12g'


class ReportExporter:
    """Writes convergence reports as JSON (with metadata), CSV and optional plots."""

    def __init__(self, output_dir: Optional[str] = None, save_plots: bool = False):
        """Initialize the report exporter.

        Args:
            output_dir: Directory to save output files (default: data/reports)
            save_plots: Also write a log-log convergence plot for per-k reports
        """
        self.output_dir = output_dir or os.path.join('data', 'reports')
        self.save_plots = save_plots

    def build_document(self, report: ConvergenceReport) -> Dict[str, Any]:
        return {
            'metadata': {
                'timestamp': datetime.now().isoformat(),
                'version': REPORT_VERSION,
                'generated_by': 'ReportExporter',
            },
            'report': report.to_dict(),
        }

    def export_report(self, report: ConvergenceReport, name: Optional[str] = None) -> Dict[str, Any]:
        """Validate and write one report.

        Args:
            report: Report to export
            name: Base filename without extension (default: report.name)

        Returns:
            Dict with export results including paths and status
        """
        name = name or report.name
        try:
            document = self.build_document(report)
            jsonschema.validate(instance=document, schema=REPORT_SCHEMA)
        except jsonschema.ValidationError as e:
            logger.error(f"Report {name} does not match the report schema: {e.message}")
            return {'success': False, 'error': e.message, 'json_path': None, 'csv_path': None}

        try:
            os.makedirs(self.output_dir, exist_ok=True)
            json_path = os.path.join(self.output_dir, f"{name}.json")
            csv_path = os.path.join(self.output_dir, f"{name}.csv")

            with open(json_path, 'w', encoding='utf-8') as f:
                json.dump(document, f, indent=2, ensure_ascii=False)
            report.csv_frame().to_csv(csv_path, index=False, float_format=CSV_FLOAT_FORMAT)
            logger.info(f"Report exported to {json_path} and {csv_path}")

            plot_path = None
            if self.save_plots and report.kind == 'convergence':
                plot_path = self.export_plot(report, name)

            return {
                'success': True,
                'json_path': json_path,
                'csv_path': csv_path,
                'plot_path': plot_path,
            }
        except OSError as e:
            logger.error(f"Error exporting report {name}: {e}", exc_info=True)
            return {'success': False, 'error': str(e), 'json_path': None, 'csv_path': None}

    def export_plot(self, report: ConvergenceReport, name: str) -> Optional[str]:
        """Log-log plot of the gap columns against k."""
        import matplotlib
        matplotlib.use('Agg')
        import matplotlib.pyplot as plt

        frame = report.rows
        columns = [c for c in ('cut_norm_gap', 'integral_gap', 'min_gap', 'minimizer_dist') if c in frame]
        fig, ax = plt.subplots(figsize=(6, 4))
        plotted = False
        for column in columns:
            values = frame[column].astype(float)
            mask = np.isfinite(values) & (values > 0)
            if mask.any():
                ax.loglog(frame['k'][mask], values[mask], marker='o', label=column)
                plotted = True
        if not plotted:
            plt.close(fig)
            logger.warning(f"Nothing to plot for report {name}")
            return None

        ax.set_xlabel('k')
        ax.set_ylabel('gap')
        ax.set_title(report.name)
        ax.legend()
        ax.grid(True, which='both', alpha=0.3)
        path = os.path.join(self.output_dir, f"{name}.png")
        fig.savefig(path, dpi=120, bbox_inches='tight')
        plt.close(fig)
        logger.info(f"Convergence plot saved to {path}")
        return path

    def load_report(self, name: str) -> Dict[str, Any]:
        """Load a report JSON by name.

        Returns:
            Dict with the report document or empty dict if file not found
        """
        path = os.path.join(self.output_dir, f"{name}.json")
        try:
            if os.path.exists(path):
                with open(path, 'r', encoding='utf-8') as f:
                    document = json.load(f)
                logger.info(f"Loaded report from {path}")
                return document
            logger.warning(f"No report file found at {path}")
            return {}
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"Error loading report {path}: {e}")
            return {}


def export_report(report, name=None, output_dir=None, save_plots=False):
    """Helper function to export a report."""
    exporter = ReportExporter(output_dir=output_dir, save_plots=save_plots)
    return exporter.export_report(report, name)


def load_report(name, output_dir=None):
    """Helper function to load a report."""
    exporter = ReportExporter(output_dir=output_dir)
    return exporter.load_report(name)
