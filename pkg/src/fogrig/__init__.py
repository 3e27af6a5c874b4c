"""fogrig: an emulated fog testbed with scripted experiment orchestration.

The package is organized around five areas:

* :mod:`fogrig.infra` -- the infrastructure graph (machines, routers,
  connections) and effective end-to-end path properties.
* :mod:`fogrig.netplan` -- translation of the model into per-agent
  impairment configurations and traffic-control scripts.
* :mod:`fogrig.agent` -- the per-machine daemon that applies impairments
  and container resource limits.
* :mod:`fogrig.apps` -- container configuration, deployment mapping, and
  lifecycle management.
* :mod:`fogrig.orchestration` -- the experiment state machine.

:mod:`fogrig.provider` provisions the emulated fleet (a local-process
provider is included) and :mod:`fogrig.cli` exposes the whole workflow.
"""

__version__ = "0.1.0"
