import pytest

from fogrig.apps.config import DeploymentError, ResolverExpression, parse_application


def test_demo_application_parses(demo_dir, factory_model):
    app = parse_application((demo_dir / "application.json").read_text(), factory_model)
    assert len(app.containers) == 11
    assert app.machines_for("camera") == ("camera",)
    assert len(app.containers_on("factory-server")) == 3
    assert {c.name for c in app.containers_on("factory-server")} \
        == {"predict-pickup", "logistics-prognosis", "aggregate"}
    assert len(app.placements()) == 11


def test_resolver_expressions_parse():
    app = parse_application({
        "containers": [{
            "name": "camera", "image": "img",
            "env": {"SERVER_IP": {"$ip_of": "cell-tower-2"}, "SERVER_PORT": "1883"},
        }],
        "deployment": [{"container": "camera", "machines": ["m1"]}],
    })
    env = app.container("camera").env
    assert env["SERVER_IP"] == ResolverExpression("ip_of", "cell-tower-2")
    assert env["SERVER_PORT"] == "1883"


def test_violations_are_collected():
    document = {
        "containers": [
            {"name": "a", "image": "img", "copy_dirs": [{"local": "x", "remote": "relative/path"}]},
            {"name": "a", "image": "img"},
            {"name": "b", "image": "img", "env": {"X": {"$frobnicate": "y"}}},
        ],
        "deployment": [
            {"container": "ghost", "machines": ["m1"]},
            {"container": "b", "machines": []},
        ],
    }
    with pytest.raises(DeploymentError) as excinfo:
        parse_application(document)
    text = "\n".join(excinfo.value.violations)
    for fragment in ("absolute", "duplicate container name", "resolver", "ghost", "no machines"):
        assert fragment in text


def test_router_deployment_rejected(routed_model):
    document = {
        "containers": [{"name": "a", "image": "img"}],
        "deployment": [{"container": "a", "machines": ["R1"]}],
    }
    with pytest.raises(DeploymentError) as excinfo:
        parse_application(document, routed_model)
    assert any("router" in v for v in excinfo.value.violations)


def test_limit_beyond_machine_capacity_rejected(routed_model):
    document = {
        "containers": [{"name": "a", "image": "img"}],
        "deployment": [{"container": "a", "machines": ["M1"],
                        "limits": {"cpu_cores": 64}}],
    }
    with pytest.raises(DeploymentError) as excinfo:
        parse_application(document, routed_model)
    assert any("exceeds machine capacity" in v for v in excinfo.value.violations)


def test_unknown_machine_in_deployment(routed_model):
    document = {
        "containers": [{"name": "a", "image": "img"}],
        "deployment": [{"container": "a", "machines": ["M99"]}],
    }
    with pytest.raises(DeploymentError):
        parse_application(document, routed_model)
