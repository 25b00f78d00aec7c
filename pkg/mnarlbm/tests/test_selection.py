import math
import unittest
from unittest import mock

from mnarlbm.model import MissingnessKind
from mnarlbm.model.exceptions import DomainError
from mnarlbm.selection import (
    SelectionConfig,
    SelectionEntry,
    SelectionTable,
    icl,
    icl_mar,
    icl_mcar,
    icl_nmar,
    select_model,
)
from mnarlbm.selection import search
from mnarlbm.selection.exceptions import AllFitsFailedError, KindMismatchError
from mnarlbm.selection.icl import class_penalty, gaussian_correction
from mnarlbm.selection.search import parse_counts, parse_kinds


def fake_fit(kind, elbo=-100.0, entropy=5.0, nq=2, nl=3) -> mock.Mock:
    return mock.Mock(
        kind=MissingnessKind.parse(kind), elbo=elbo, entropy=entropy, nq=nq, nl=nl
    )


def entry(nq, nl, kind, value) -> SelectionEntry:
    kind = MissingnessKind.parse(kind)

    return SelectionEntry(nq, nl, kind, value, value, f"{kind.value}-{nq}x{nl}")


class TestIcl(unittest.TestCase):
    """Test class for the :mod:`mnarlbm.selection.icl` module.

    """

    def test_class_penalty(self):
        """Tests the :func:`mnarlbm.selection.icl.class_penalty` function."""
        expected = (
            0.5 * 6 * math.log(600) + 0.5 * math.log(20) + 0.5 * 2 * math.log(30)
        )
        self.assertAlmostEqual(class_penalty(20, 30, 2, 3), expected)
        self.assertAlmostEqual(class_penalty(5, 7, 1, 1), 0.5 * math.log(35))

    def test_icl(self):
        """Tests the ICL formulas of the three missingness kinds."""
        # -- Testing correct results --------------------------------------------------
        penalty = class_penalty(20, 30, 2, 3)
        gaussian = (
            20 * math.log(2 * math.pi)
            - math.log(20)
            + 30 * math.log(2 * math.pi)
            - math.log(30)
        )
        self.assertAlmostEqual(gaussian_correction(20, 30), gaussian)

        self.assertAlmostEqual(
            icl_nmar(fake_fit("mnar"), 20, 30, 2, 3), -100.0 - penalty + gaussian
        )
        self.assertAlmostEqual(
            icl_nmar(fake_fit("mnar"), 20, 30, 2, 3, use_entropy=False),
            -105.0 - penalty + gaussian,
        )
        self.assertAlmostEqual(
            icl_mar(fake_fit("mar"), 20, 30, 2, 3), -100.0 - penalty + 0.5 * gaussian
        )
        self.assertAlmostEqual(
            icl_mcar(fake_fit("mcar"), 20, 30, 2, 3), -100.0 - penalty
        )

        for kind, formula in (("mcar", icl_mcar), ("mar", icl_mar), ("mnar", icl_nmar)):
            fit = fake_fit(kind)
            self.assertEqual(icl(fit, 20, 30), formula(fit, 20, 30, 2, 3))

        # More classes cost more for the same bound.
        self.assertLess(
            icl(fake_fit("mar", nq=3, nl=3), 20, 30), icl(fake_fit("mar"), 20, 30)
        )

        # -- Testing KindMismatchError ------------------------------------------------
        with self.assertRaises(KindMismatchError) as cm:
            icl_nmar(fake_fit("mar"), 20, 30, 2, 3)

        self.assertEqual((cm.exception.expected, cm.exception.actual), ("MNAR", "MAR"))

        with self.assertRaises(KindMismatchError):
            icl_mcar(fake_fit("mnar"), 20, 30, 2, 3)


class TestSearch(unittest.TestCase):
    """Test class for the :mod:`mnarlbm.selection.search` module.

    """

    def test_parse_counts(self):
        """Tests the :func:`mnarlbm.selection.search.parse_counts` function."""
        # -- Testing correct results --------------------------------------------------
        self.assertEqual(parse_counts("2-5"), (2, 3, 4, 5))
        self.assertEqual(parse_counts("2,4"), (2, 4))
        self.assertEqual(parse_counts(3), (3,))
        self.assertEqual(parse_counts([1, 2]), (1, 2))

        # -- Testing DomainError ------------------------------------------------------
        for value in ("5-2", "0-2", "two", [], "0"):
            with self.assertRaises(DomainError):
                parse_counts(value)

    def test_parse_kinds(self):
        """Tests the :func:`mnarlbm.selection.search.parse_kinds` function."""
        self.assertEqual(
            parse_kinds("mcar, nmar"), (MissingnessKind.MCAR, MissingnessKind.MNAR)
        )
        self.assertEqual(parse_kinds(["mar"]), (MissingnessKind.MAR,))

        with self.assertRaises(DomainError):
            parse_kinds("")

        with self.assertRaises(DomainError):
            parse_kinds("mar,other")

    def test_selection_table(self):
        """Tests the :class:`mnarlbm.selection.SelectionTable` class."""
        # -- Testing correct results --------------------------------------------------
        table = SelectionTable(
            [
                entry(2, 2, "mar", -50.0),
                entry(2, 3, "mnar", -40.0),
                entry(3, 3, "mar", -45.0),
            ]
        )
        self.assertEqual(len(table), 3)
        self.assertEqual(table.best().fit_ref, "mnar-2x3")
        self.assertEqual(
            set(table.to_rows()[0]),
            {"nq", "nl", "kind", "icl", "elbo", "fit_ref", "status"},
        )

        # Ties go to fewer classes, then to the simpler kind.
        tied = SelectionTable([entry(3, 3, "mar", -40.0), entry(2, 2, "mnar", -40.0)])
        self.assertEqual(tied.best().fit_ref, "mnar-2x2")
        tied = SelectionTable([entry(2, 2, "mnar", -40.0), entry(2, 2, "mar", -40.0)])
        self.assertEqual(tied.best().fit_ref, "mar-2x2")

        # Failed entries are left out.
        failed = SelectionEntry(
            4, 4, MissingnessKind.MNAR, None, None, "mnar-4x4", status="diverged"
        )
        table = SelectionTable([failed, entry(2, 2, "mar", -80.0)])
        self.assertFalse(table[0].ok)
        self.assertEqual(table.best().fit_ref, "mar-2x2")

        # -- Testing AllFitsFailedError -----------------------------------------------
        with self.assertRaises(AllFitsFailedError) as cm:
            SelectionTable([failed]).best()

        self.assertEqual(cm.exception.first_error, "diverged")

    def test_selection_config(self):
        """Tests the :class:`mnarlbm.selection.SelectionConfig` class."""
        config = SelectionConfig.from_mapping(
            {"nq_range": "1-2", "kinds": "mnar", "n_jobs": None, "seed": 4}
        )
        self.assertEqual(config.nq_range, (1, 2))
        self.assertEqual(config.nl_range, (2, 3, 4))
        self.assertEqual(config.kinds, (MissingnessKind.MNAR,))
        self.assertEqual(config.n_jobs, 1)

    @mock.patch.object(search, "icl", autospec=True)
    @mock.patch.object(search, "multi_start_fit", autospec=True)
    def test_select_model(self, mock_fit, mock_icl):
        """Tests the :func:`mnarlbm.selection.select_model` function."""
        # -- Testing correct results --------------------------------------------------
        def fit(x, nq, nl, kind, cfg):
            if (nq, nl, kind) == (3, 3, MissingnessKind.MNAR):
                raise ValueError("diverged")

            return fake_fit(kind, elbo=-float(nq + nl), nq=nq, nl=nl)

        def value(result, n1, n2, use_entropy):
            return 10.0 if (result.nq, result.nl) == (2, 3) else 0.0

        mock_fit.side_effect = fit
        mock_icl.side_effect = value
        x = mock.Mock(n_rows=10, n_cols=12)
        best, table = select_model(x, "2-3", "2-3", "mar,mnar")

        self.assertEqual(mock_fit.call_count, 8)
        self.assertEqual(
            [e.fit_ref for e in table[:4]],
            ["mar-2x2", "mnar-2x2", "mar-2x3", "mnar-2x3"],
        )
        self.assertEqual(best.fit_ref, "mar-2x3")
        self.assertEqual(best.icl, 10.0)
        self.assertEqual(best.elbo, -5.0)
        self.assertEqual(table[-1].status, "diverged")
        self.assertIsNone(table[-1].icl)
        self.assertEqual(len(table.successful()), 7)

        # -- Testing AllFitsFailedError -----------------------------------------------
        mock_fit.side_effect = ValueError("no data")

        with self.assertRaises(AllFitsFailedError) as cm:
            select_model(x, 2, 2, "mar")

        self.assertEqual(cm.exception.n_cells, 1)
        self.assertEqual(cm.exception.first_error, "no data")


if __name__ == "__main__":
    unittest.main()
