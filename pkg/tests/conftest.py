import json
from pathlib import Path
from typing import Any, Callable, Dict

import pytest

from app.agents.orchestrator import ForgeOrchestrator
from app.config import Settings
from app.models.schemas import GraphFile, ParamsFile
from app.services.graph_core import StableGraph, lollipop_graph, one_vertex_graph
from app.services.params import parse_params, series_ring_for
from app.services.rings import ComplexRing, RationalRing
from app.services.schottky_engine import SchottkyGroup, build_group

SAMPLE_DATA = Path(__file__).resolve().parent.parent / "sample_data"


def _sample(name: str) -> Dict[str, Any]:
    return json.loads((SAMPLE_DATA / name).read_text())


@pytest.fixture
def settings() -> Settings:
    return Settings(wordlen=4, degree=4)


@pytest.fixture
def forge(settings: Settings) -> ForgeOrchestrator:
    return ForgeOrchestrator(settings)


@pytest.fixture
def write_json(tmp_path: Path) -> Callable[[str, Any], str]:
    def write(name: str, data: Any) -> str:
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return str(path)

    return write


# Graph and parameter files

@pytest.fixture
def genus1_graph() -> Dict[str, Any]:
    return _sample("genus1_graph.json")


@pytest.fixture
def genus1_params() -> Dict[str, Any]:
    return _sample("genus1_params.json")


@pytest.fixture
def genus2_graph() -> Dict[str, Any]:
    return _sample("genus2_graph.json")


@pytest.fixture
def genus2_params() -> Dict[str, Any]:
    return _sample("genus2_params.json")


@pytest.fixture
def lollipop_graph_file() -> Dict[str, Any]:
    return _sample("lollipop_graph.json")


@pytest.fixture
def lollipop_params() -> Dict[str, Any]:
    return _sample("lollipop_params.json")


# Built groups

def make_group(graph_data: Dict[str, Any], params_data: Dict[str, Any], ring, settings: Settings) -> SchottkyGroup:
    graph = StableGraph.from_model(GraphFile.model_validate(graph_data))
    params = parse_params(graph, ParamsFile.model_validate(params_data), ring)
    return build_group(graph, params, graph.tails[0].vertex, settings.wordlen, settings)


@pytest.fixture
def genus2_complex(genus2_graph, genus2_params, settings) -> SchottkyGroup:
    return make_group(genus2_graph, genus2_params, ComplexRing(settings.tol), settings)


@pytest.fixture
def genus2_rational(genus2_graph, genus2_params, settings) -> SchottkyGroup:
    return make_group(genus2_graph, genus2_params, RationalRing(), settings)


@pytest.fixture
def lollipop_series(lollipop_graph_file, lollipop_params, settings) -> SchottkyGroup:
    graph = StableGraph.from_model(GraphFile.model_validate(lollipop_graph_file))
    return make_group(lollipop_graph_file, lollipop_params, series_ring_for(graph, settings.degree), settings)


@pytest.fixture
def lollipop_1_2() -> StableGraph:
    return lollipop_graph(1, 2)


@pytest.fixture
def one_vertex_2_1() -> StableGraph:
    return one_vertex_graph(2, 1)


@pytest.fixture
def group_factory() -> Callable[..., SchottkyGroup]:
    return make_group
