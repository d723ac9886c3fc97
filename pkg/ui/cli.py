import math
import os
import sys

from core.analysis import PointClassifier, curvature_of, fit_rate
from core.geometry import BendletParams
from core.output_formatter import OutputFormatter
from core.selftest import SelfTest, format_table
from core.signals import Disk, PointType
from utils.errors import BendlabError, FitError
from utils.logger import Logger
from utils.performance import PerformanceLogger

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_ERROR = 2


class CLI:
    """Command implementations; every command writes its result to stdout or ``--out``"""

    def __init__(self, experiment, stdout=None):
        self.logger = Logger().get_logger('cli')
        self.perf = PerformanceLogger()
        self.experiment = experiment
        self.stdout = stdout or sys.stdout
        self.formatter = OutputFormatter()

        self.commands = {
            'coeff': self.coeff,
            'decay': self.decay,
            'fit': self.fit,
            'classify': self.classify,
            'sweep-figure': self.sweep_figure,
            'selftest': self.selftest,
        }

    def run(self, command, args):
        """Dispatch one command and translate failures into exit codes"""
        if command not in self.commands:
            self.logger.error(f"Unknown command: {command}")
            print(f"Error: unknown command '{command}'", file=sys.stderr)
            return EXIT_ERROR
        try:
            with self.perf.start_timer(f"Command: {command}"):
                return self.commands[command](args)
        except BendlabError as e:
            self.logger.error(f"{command} failed: {e}")
            print(f"Error: {e}", file=sys.stderr)
            return EXIT_ERROR

    def _emit(self, text, path=None):
        path = path or self.experiment.out
        if path:
            self.formatter.save_to_file(text, path)
        else:
            self.stdout.write(text if text.endswith("\n") else text + "\n")

    def coeff(self, args):
        transform = self.experiment.build_transform()
        signal = self.experiment.build_signal()
        params = BendletParams(args.a, args.s, args.b, tuple(args.t), args.iota)
        value = transform.coefficient(signal, params)
        self.logger.info(f"Coefficient at {params}: {value!r}")
        self._emit(repr(float(value)))
        return EXIT_OK

    def decay(self, args):
        transform = self.experiment.build_transform()
        signal = self.experiment.build_signal()
        curve = transform.decay_curve(signal, args.s, args.b, tuple(args.t), args.iota,
                                      self.experiment.j_min, self.experiment.j_max)
        try:
            slope = fit_rate(curve).slope
        except FitError as e:
            self.logger.warning(f"No slope for this curve: {e}")
            slope = None
        if self._decay_format(args) == 'json':
            self._emit(self.formatter.decay_to_json([curve], fitted_slope=slope))
        else:
            self._emit(self.formatter.decay_to_csv([curve], fitted_slope=slope))
        return EXIT_OK

    def _decay_format(self, args):
        """Explicit --format, else the --out extension, else CSV"""
        chosen = getattr(args, 'format', None)
        if chosen:
            return chosen
        out = self.experiment.out or ''
        return 'json' if out.lower().endswith('.json') else 'csv'

    def fit(self, args):
        """Re-read a decay CSV and print the fitted slope of every curve in it"""
        if not os.path.exists(args.input):
            raise BendlabError(f"decay CSV not found: {args.input}")
        with open(args.input, 'r', encoding='utf-8') as f:
            curves, stored = self.formatter.parse_decay_csv(f.read())
        lines = []
        for curve in curves:
            slope = fit_rate(curve).slope
            lines.append(repr(float(slope)))
            if stored is not None and len(curves) == 1 and not (
                    math.isinf(stored) and math.isinf(slope)) and abs(stored - slope) > 1e-12:
                self.logger.warning(f"Refitted slope {slope!r} differs from stored {stored!r}")
        self._emit("\n".join(lines))
        return EXIT_OK

    def classify(self, args):
        points = [list(p) for p in args.point] if args.point else list(self.experiment.points)
        signal = self.experiment.build_signal()
        results = []
        if points:
            classifier = PointClassifier(self.experiment.build_transform(), self.experiment.s_values(),
                                         self.experiment.b_values(), self.experiment.j_min, self.experiment.j_max)
            results = [classifier.classify(signal, t) for t in points]
        self._emit(self.formatter.classification_to_json(results))
        return EXIT_OK

    def sweep_figure(self, args):
        """Decay curves over a b-grid at (r, 0) for each radius, plus a curvature summary"""
        radii = args.radii if args.radii else self.experiment.radii
        out_dir = self.experiment.out or "sweep_figure"
        transform = self.experiment.build_transform()
        classifier = PointClassifier(transform, [0.0], self.experiment.b_values(),
                                     self.experiment.j_min, self.experiment.j_max, cones=(1,))
        b_grid = classifier.b_grid
        summary = []
        for r in radii:
            r = float(r)
            disk = Disk((0.0, 0.0), r)
            t = (r, 0.0)
            curves = transform.sweep(disk, t, 1, [0.0], b_grid, classifier.j_min, classifier.j_max)
            coarse = max(curves, key=lambda c: c.finest_magnitude)
            fine_grid, fine_step = classifier._refined_grid(coarse.b, classifier.b_step)
            refined = transform.sweep(disk, t, 1, [0.0], fine_grid, classifier.j_min, classifier.j_max)
            best = max(refined, key=lambda c: c.finest_magnitude)
            b_hat = classifier.extrapolated_bending(disk, t, 0.0, 1, best.b, fine_step)
            if b_hat is None:
                self.logger.warning(f"r={r}: no bending peak per scale, reporting the refined grid cell")
                b_hat = best.b
            k_hat = curvature_of(PointType(0.0, b_hat, 1))
            summary.append({"radius": r, "b_hat": b_hat, "K_hat": k_hat, "inv_r": 1.0 / r})
            self.logger.info(f"r={r}: b_hat={b_hat:.5f} (grid {best.b}, coarse {coarse.b}), K_hat={k_hat:.4f}, "
                             f"1/r={1.0 / r:.4f}")
            self.formatter.save_to_file(self.formatter.decay_to_csv(curves + refined),
                                        os.path.join(out_dir, f"decay_r{r:.2f}.csv"))

        text = self.formatter.curvature_summary_to_csv(summary)
        self.formatter.save_to_file(text, os.path.join(out_dir, "summary.csv"))
        self.stdout.write(text)
        return EXIT_OK

    def selftest(self, args):
        results = SelfTest(self.experiment.build_transform(), self.experiment.seed).run()
        self.stdout.write(format_table(results) + "\n")
        return EXIT_OK if all(r.passed for r in results) else EXIT_FAILURE
