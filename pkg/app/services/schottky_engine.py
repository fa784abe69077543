# app/services/schottky_engine.py

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from app.config import Settings
from app.models.errors import InputError, MoebiusError, SchottkyError
from app.services.graph_core import (
    Branch,
    EdgePath,
    StableGraph,
    cyclic_reduction,
    fundamental_group_generators,
    generator_edges,
    reduce_path,
    tail_path,
    type_of,
)
from app.services.moebius import (
    MoebiusMap,
    ProjectivePoint,
    fixed_points,
    multiplier,
    phi_of_edge,
    word_to_map,
)
from app.services.params import EdgeParameters, check_generic
from app.services.rings import ComplexRing, Ring, SeriesRing

logger = logging.getLogger(__name__)

# A group word is a tuple of nonzero letters: k stands for gamma_k, -k for its inverse.
Word = Tuple[int, ...]


def alphabet(genus: int) -> List[int]:
    """Letters in canonical order 1, -1, 2, -2, ..."""
    out: List[int] = []
    for i in range(1, genus + 1):
        out += [i, -i]
    return out


def word_label(word: Sequence[int]) -> str:
    if not word:
        return "1"
    return "*".join(f"g{s}" if s > 0 else f"g{-s}^-1" for s in word)


def reduce_word(letters: Sequence[int]) -> Word:
    stack: List[int] = []
    for s in letters:
        if stack and stack[-1] == -s:
            stack.pop()
        else:
            stack.append(s)
    return tuple(stack)


def inverse_word(word: Sequence[int]) -> Word:
    return tuple(-s for s in reversed(word))


def word_count(genus: int, length: int) -> int:
    """Number of reduced words of length <= length in a free group of rank genus."""
    if genus == 0:
        return 1
    return 1 + sum(2 * genus * (2 * genus - 1) ** (l - 1) for l in range(1, length + 1))


@dataclass(frozen=True)
class Generator:
    index: int
    edge: str
    path: EdgePath
    matrix: MoebiusMap
    sigma: EdgePath
    kappa: EdgePath
    attractive: ProjectivePoint
    repulsive: ProjectivePoint
    multiplier: Any
    # fixed points of the cyclic core kappa, before transport along sigma
    core_attractive: ProjectivePoint
    core_repulsive: ProjectivePoint


@dataclass(frozen=True)
class IsometricCircle:
    letter: int
    center: complex
    radius: float


class SchottkyGroup:
    """
    Image of pi_1(graph, base) under the edge atoms. Generators follow the
    non-tree edges in id order; all word data is cached per cutoff.
    """

    def __init__(
        self,
        graph: StableGraph,
        params: EdgeParameters,
        base: str,
        wordlen: int,
        settings: Optional[Settings] = None,
    ):
        self.graph = graph
        self.params = params
        self.ring: Ring = params.ring
        self.base = base
        self.wordlen = wordlen
        self.settings = settings or Settings()
        self.logger = logging.getLogger(__name__)
        self.genus, _ = type_of(graph)
        self.atoms = self._atoms()
        self.generators = self._generators()
        self._words: Dict[int, List[Tuple[Word, MoebiusMap]]] = {}
        self._rebased: Dict[str, "SchottkyGroup"] = {}
        # "complete" or "partial" once check_schottky has run
        self.schottky_check: Optional[str] = None

    # --- construction ---------------------------------------------------

    def _atoms(self) -> Dict[Branch, MoebiusMap]:
        atoms: Dict[Branch, MoebiusMap] = {}
        for e in self.graph.edges:
            plus, minus = Branch(e.id, 1), Branch(e.id, -1)
            y = self.params.y[e.id]
            atoms[plus] = phi_of_edge(self.params.point(plus), self.params.point(minus), y)
            atoms[minus] = phi_of_edge(self.params.point(minus), self.params.point(plus), y)
        return atoms

    def _generators(self) -> List[Generator]:
        out = []
        paths = fundamental_group_generators(self.graph, self.base)
        for index, (eid, path) in enumerate(zip(generator_edges(self.graph), paths), start=1):
            matrix = word_to_map(path, self.atoms, self.ring)
            sigma, kappa = cyclic_reduction(path)
            core = self._core_fixed_points(kappa)
            back = word_to_map(sigma.inverse(), self.atoms, self.ring)
            out.append(
                Generator(
                    index, eid, path, matrix, sigma, kappa,
                    back.apply(core[0]).normalized(),
                    back.apply(core[1]).normalized(),
                    core[2],
                    core[0],
                    core[1],
                )
            )
            self.logger.debug(f"generator {index} along {path}: multiplier {core[2]}")
        return out

    def _core_fixed_points(self, kappa: EdgePath) -> Tuple[ProjectivePoint, ProjectivePoint, Any]:
        """Fixed points and multiplier of a cyclically reduced closed path."""
        if not len(kappa):
            raise MoebiusError("not loxodromic: the identity has no fixed points")
        core = word_to_map(kappa, self.atoms, self.ring)
        # congruent to the limits of the iterates of core and core^-1
        starts = (self.params.point(kappa.branches[-1]), self.params.point(-kappa.branches[0]))
        margin = self.settings.loxodromy_margin
        points = fixed_points(core, self.ring, margin, starts)
        beta = multiplier(core, self.ring, margin, points=points)
        return points[0], points[1], beta

    def _path_fixed_points(self, sigma: EdgePath, kappa: EdgePath) -> Tuple[ProjectivePoint, ProjectivePoint, Any]:
        """Fixed points of word_to_map(sigma kappa sigma^-1) through those of the cyclic core."""
        attractive, repulsive, beta = self._core_fixed_points(kappa)
        back = word_to_map(sigma.inverse(), self.atoms, self.ring)
        return back.apply(attractive).normalized(), back.apply(repulsive).normalized(), beta

    # --- letters and words ----------------------------------------------

    def gamma(self, letter: int) -> MoebiusMap:
        if letter == 0 or abs(letter) > self.genus:
            raise InputError(f"no generator letter {letter} in genus {self.genus}")
        m = self.generators[abs(letter) - 1].matrix
        return m if letter > 0 else m.inverse()

    def letter_path(self, letter: int) -> EdgePath:
        p = self.generators[abs(letter) - 1].path
        return p if letter > 0 else p.inverse()

    def word_matrix(self, word: Sequence[int]) -> MoebiusMap:
        out = MoebiusMap.identity(self.ring)
        for s in word:
            out = out @ self.gamma(s)
        return out

    def word_path(self, word: Sequence[int]) -> EdgePath:
        """Reduced edge path whose image is the word's matrix."""
        branches: List[Branch] = []
        for s in reversed(word):
            branches.extend(self.letter_path(s).branches)
        return EdgePath(reduce_path(branches))

    def path_matrix(self, word: Sequence[int], matrix: Optional[MoebiusMap] = None, start: Optional[EdgePath] = None) -> MoebiusMap:
        """
        The word's matrix, preceded by the edge path start if given. Over
        series it is built along the reduced edge path: the plain product of
        generator matrices carries factors phi_h phi_-h whose reduction is zero.
        """
        if not isinstance(self.ring, SeriesRing):
            m = matrix if matrix is not None else self.word_matrix(word)
            if start is not None:
                m = m @ word_to_map(start, self.atoms, self.ring)
            return m
        head = start.branches if start is not None else ()
        path = EdgePath(reduce_path(head + self.word_path(word).branches))
        return word_to_map(path, self.atoms, self.ring)

    def alpha(self, letter: int) -> ProjectivePoint:
        """alpha_i (attractive) for letter i > 0, alpha_-i (repulsive) for -i."""
        gen = self.generators[abs(letter) - 1]
        return gen.attractive if letter > 0 else gen.repulsive

    def beta(self, i: int) -> Any:
        return self.generators[i - 1].multiplier

    def _subtree(self, prefix: Tuple[Word, MoebiusMap], length: int) -> List[Tuple[Word, MoebiusMap]]:
        out: List[Tuple[Word, MoebiusMap]] = []
        stack = [prefix]
        letters = alphabet(self.genus)
        while stack:
            word, m = stack.pop()
            out.append((word, m))
            if len(word) >= length:
                continue
            children = [(word + (s,), m @ self.gamma(s)) for s in letters if s != -word[-1]]
            stack.extend(reversed(children))
        return out

    def enumerate_reduced_words(self, length: Optional[int] = None) -> List[Tuple[Word, MoebiusMap]]:
        """All reduced words up to the cutoff with their matrices, depth-first in canonical order."""
        length = self.wordlen if length is None else length
        if length < 0:
            raise InputError("word length cutoff must be non-negative")
        if length in self._words:
            return self._words[length]
        roots = [((s,), self.gamma(s)) for s in alphabet(self.genus)] if length > 0 else []
        threads = max(1, self.settings.threads)
        if threads > 1 and len(roots) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(lambda r: self._subtree(r, length), roots))
        else:
            parts = [self._subtree(r, length) for r in roots]
        words = [((), MoebiusMap.identity(self.ring))]
        for part in parts:
            words.extend(part)
        self.logger.debug(f"enumerated {len(words)} reduced words up to length {length}")
        self._words[length] = words
        return words

    def coset_reps(self, i: int, length: Optional[int] = None) -> List[Tuple[Word, MoebiusMap]]:
        """Representatives of Gamma / <gamma_i>: words not ending in gamma_i^{+-1}."""
        self._require_index(i)
        return [(w, m) for w, m in self.enumerate_reduced_words(length) if not w or abs(w[-1]) != i]

    def double_coset_reps(self, i: int, j: int, length: Optional[int] = None) -> List[Tuple[Word, MoebiusMap]]:
        """Representatives of <gamma_i> \\ Gamma / <gamma_j>."""
        self._require_index(i)
        self._require_index(j)
        return [
            (w, m)
            for w, m in self.enumerate_reduced_words(length)
            if not w or (abs(w[0]) != i and abs(w[-1]) != j)
        ]

    def _require_index(self, i: int) -> None:
        if not 1 <= i <= self.genus:
            raise InputError(f"generator index {i} outside 1..{self.genus}")

    # --- points moved by words ------------------------------------------

    def fixed_point_image(self, word: Sequence[int], letter: int, matrix: Optional[MoebiusMap] = None) -> ProjectivePoint:
        """delta(alpha_letter) for the word delta (whose matrix may be passed in)."""
        if not isinstance(self.ring, SeriesRing):
            m = matrix if matrix is not None else self.word_matrix(word)
            return m.apply(self.alpha(letter)).normalized()
        # Over series the point is moved along the reduced edge path, so that no
        # intermediate point sits on the kernel of a degenerate atom.
        gen = self.generators[abs(letter) - 1]
        inner = gen.core_attractive if letter > 0 else gen.core_repulsive
        path = EdgePath(reduce_path(gen.sigma.inverse().branches + self.word_path(word).branches))
        return word_to_map(path, self.atoms, self.ring).apply(inner).normalized()

    def tail_point(self, t: str) -> ProjectivePoint:
        """phi_t(x_t): the tail point carried along the tree into the base chart."""
        return self.tail_point_image((), t)

    def tail_point_image(self, word: Sequence[int], t: str, matrix: Optional[MoebiusMap] = None) -> ProjectivePoint:
        """gamma(phi_t(x_t)) for the word gamma."""
        tail = Branch(t, 0)
        x = self.params.point(tail)
        if not isinstance(self.ring, SeriesRing):
            m = matrix if matrix is not None else self.word_matrix(word)
            carry = word_to_map(tail_path(self.graph, t, self.base), self.atoms, self.ring)
            return (m @ carry).apply(x).normalized()
        path = EdgePath(reduce_path(tail_path(self.graph, t, self.base).branches + self.word_path(word).branches))
        return word_to_map(path, self.atoms, self.ring).apply(x).normalized()

    def word_fixed_points(self, word: Sequence[int]) -> Tuple[ProjectivePoint, ProjectivePoint]:
        sigma, kappa = cyclic_reduction(self.word_path(word))
        attractive, repulsive, _ = self._path_fixed_points(sigma, kappa)
        return attractive, repulsive

    def word_multiplier(self, word: Sequence[int]) -> Any:
        sigma, kappa = cyclic_reduction(self.word_path(word))
        return self._path_fixed_points(sigma, kappa)[2]

    # --- Schottky condition ---------------------------------------------

    def isometric_circles(self) -> List[IsometricCircle]:
        """Circles |cz + d| = |det|^(1/2) of gamma_i^{+-1}; generators with c = 0 have none."""
        circles = []
        for letter in alphabet(self.genus):
            a, b, c, d = (complex(x) for x in self.gamma(letter).entries())
            det = a * d - b * c
            scale = max(abs(a), abs(b), abs(c), abs(d))
            if abs(c) <= 1e-14 * scale:
                continue
            circles.append(IsometricCircle(letter, -d / c, math.sqrt(abs(det)) / abs(c)))
        return circles

    def check_schottky(self) -> str:
        """
        Pairwise separation of the isometric circles. Returns "partial" when a
        generator fixes infinity and so has no circle, else "complete".
        """
        circles = self.isometric_circles()
        margin = self.settings.schottky_margin
        for k, first in enumerate(circles):
            for second in circles[k + 1:]:
                if abs(first.center - second.center) <= margin * (first.radius + second.radius):
                    raise SchottkyError(
                        "isometric circles overlap (decrease |y| or respace x): "
                        f"letters {first.letter} and {second.letter}"
                    )
        self.schottky_check = "complete"
        if len(circles) < 2 * self.genus:
            self.logger.warning("a generator fixes infinity; the isometric-circle test is partial")
            self.schottky_check = "partial"
        return self.schottky_check

    # --- derived groups ---------------------------------------------------

    def rebased(self, vertex: str) -> "SchottkyGroup":
        if vertex == self.base:
            return self
        if vertex not in self._rebased:
            self._rebased[vertex] = build_group(self.graph, self.params, vertex, self.wordlen, self.settings)
        return self._rebased[vertex]

    def conjugated(self, g: MoebiusMap) -> "SchottkyGroup":
        """The group rebuilt from parameters moved by g, i.e. g Gamma g^-1."""
        return build_group(self.graph, self.params.transformed(g), self.base, self.wordlen, self.settings)


def build_group(
    graph: StableGraph,
    params: EdgeParameters,
    base: str,
    wordlen: int,
    settings: Optional[Settings] = None,
    check: bool = True,
) -> SchottkyGroup:
    """check=False skips the isometric-circle test; loxodromy is still enforced per word."""
    graph.require_vertex(base)
    settings = settings or Settings()
    if isinstance(params.ring, SeriesRing) and wordlen < params.ring.cutoff:
        logger.warning(f"word length {wordlen} is below the series degree {params.ring.cutoff}; tails are not exact")
    check_generic(graph, params)
    group = SchottkyGroup(graph, params, base, wordlen, settings)
    if check and isinstance(params.ring, ComplexRing):
        group.check_schottky()
    logger.info(f"built Schottky group of genus {group.genus} at base {base} over {params.ring.tag}")
    return group
