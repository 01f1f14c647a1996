import logging
import os

logger = logging.getLogger(__name__)


def _pyplot():
    import matplotlib
    matplotlib.use('Agg', force=True)  # Use 'Agg' backend for rendering without GUI
    import matplotlib.pyplot as plt
    return plt


class Visualizer:
    def __init__(self, figure_width=8.0, figure_height=4.5, dpi=100, line_width=0.8,
                 line_color='#1f4e79', marker_color='#f49931'):
        self.figure_width = figure_width
        self.figure_height = figure_height
        self.dpi = dpi
        self.line_width = line_width
        self.line_color = line_color
        self.marker_color = marker_color

    def _save(self, plt, filename, label):
        os.makedirs(os.path.dirname(os.path.abspath(filename)), exist_ok=True)
        plt.savefig(filename, dpi=self.dpi)
        plt.close()
        logger.info("%s saved to %s", label, filename)
        return filename

    def plot_spectrum(self, spectrum, filename, report=None, title='Two-tone spectrum'):
        """Spectrum in dBFS over GHz, with the measured products marked."""
        if spectrum is None or not len(spectrum.power_dbfs):
            logger.warning("No spectrum to plot.")
            return None
        try:
            plt = _pyplot()
            freqs_ghz = spectrum.freqs_hz / 1e9
            plt.figure(figsize=(self.figure_width, self.figure_height))
            plt.plot(freqs_ghz, spectrum.power_dbfs, color=self.line_color, linewidth=self.line_width)
            if report is not None:
                marked = [k for name, bins in report.product_bins.items() if not name.endswith('_all') for k in bins]
                plt.plot(freqs_ghz[marked], spectrum.power_dbfs[marked], 'o', color=self.marker_color,
                         markersize=4, label='IM3/IM5/IM7')
                plt.axhline(report.noise_floor_dbfs_per_bin, color='grey', linestyle=':', linewidth=0.8,
                            label='median noise floor')
                plt.legend(loc='upper right')
            plt.ylim(max(-200.0, float(spectrum.power_dbfs.min()) - 5.0), 5.0)
            plt.title(title)
            plt.xlabel('Frequency (GHz)')
            plt.ylabel('Power (dBFS)')
            plt.grid(True, linewidth=0.3)
            return self._save(plt, filename, 'Spectrum plot')
        except Exception as e:
            logger.error("Error generating spectrum plot: %s", e, exc_info=True)
            return None

    def plot_transfer(self, table, linearity, filename):
        """INL and DNL of a transfer characteristic, one panel each."""
        if table is None or len(table) < 2:
            logger.warning("No transfer characteristic to plot.")
            return None
        try:
            import numpy as np
            plt = _pyplot()
            codes = np.arange(len(table))
            figure, (inl_axis, dnl_axis) = plt.subplots(2, 1, sharex=True,
                                                        figsize=(self.figure_width, self.figure_height))
            inl_axis.plot(codes, linearity.inl, color=self.line_color, linewidth=self.line_width)
            inl_axis.set_ylabel('INL (LSB)')
            inl_axis.set_title(f'Peak INL {linearity.peak_inl:.3f} LSB, peak DNL {linearity.peak_dnl:.3f} LSB')
            dnl_axis.plot(codes[1:], linearity.dnl, color=self.line_color, linewidth=self.line_width)
            dnl_axis.axvline(linearity.max_jump_code + 1, color=self.marker_color, linewidth=0.8)
            dnl_axis.set_ylabel('DNL (LSB)')
            dnl_axis.set_xlabel('Code')
            for axis in (inl_axis, dnl_axis):
                axis.grid(True, linewidth=0.3)
            figure.tight_layout()
            return self._save(plt, filename, 'Transfer plot')
        except Exception as e:
            logger.error("Error generating transfer plot: %s", e, exc_info=True)
            return None

    def plot_lut_deviation(self, lut, filename, reference=None):
        """lut[x] - x over the code range, optionally next to a reference LUT."""
        if lut is None or not len(lut):
            logger.warning("No LUT to plot.")
            return None
        try:
            import numpy as np
            plt = _pyplot()
            codes = np.arange(len(lut))
            plt.figure(figsize=(self.figure_width, self.figure_height))
            plt.step(codes, lut.entries - codes, where='mid', color=self.line_color,
                     linewidth=self.line_width, label='LUT')
            if reference is not None:
                plt.step(codes, reference.entries - codes, where='mid', color=self.marker_color,
                         linewidth=self.line_width, label='reference')
                plt.legend(loc='upper right')
            plt.title(f'LUT deviation from identity ({lut.deviation_count()} entries differ)')
            plt.xlabel('Code')
            plt.ylabel('lut[x] - x (codes)')
            plt.grid(True, linewidth=0.3)
            return self._save(plt, filename, 'LUT plot')
        except Exception as e:
            logger.error("Error generating LUT plot: %s", e, exc_info=True)
            return None
