"""Deployment artifact generation: docker-compose and kubernetes manifests
plus a local launch script, all as deterministic text.

YAML is emitted from fixed templates with explicit key order so two runs over
the same FlowSpec are byte-identical.
"""

from __future__ import annotations

from .errors import MissingImage
from .flowspec import FlowSpec, NodeDecl

GATEWAY_NAME = "gateway"


def _image_for(node: NodeDecl, registry: str | None) -> str:
    if node.image:
        return node.image
    if registry:
        return f"{registry}/{node.name}:latest"
    raise MissingImage(
        f"node {node.name!r} has no image and no registry is configured")


def _gateway_image(registry: str | None) -> str:
    return f"{registry}/{GATEWAY_NAME}:latest" if registry else f"{GATEWAY_NAME}:latest"


def generate_compose(spec: FlowSpec) -> str:
    """docker-compose manifest: one service per node plus the gateway."""
    lines = ["services:"]
    for node in spec.nodes:
        lines += [
            f"  {node.name}:",
            f"    image: {_image_for(node, spec.deploy.registry)}",
            f"    command: [\"--port\", \"{node.port}\"]",
            "    ports:",
            f"      - \"{node.port}:{node.port}\"",
        ]
    port = spec.deploy.gateway_port
    lines += [
        f"  {GATEWAY_NAME}:",
        f"    image: {_gateway_image(spec.deploy.registry)}",
        f"    command: [\"--port\", \"{port}\"]",
        "    ports:",
        f"      - \"{port}:{port}\"",
        "    depends_on:",
    ]
    for node in spec.nodes:
        lines.append(f"      - {node.name}")
    if not spec.nodes:
        lines.pop()  # no depends_on block for a gateway-only manifest
    return "\n".join(lines) + "\n"


def _k8s_pair(name: str, image: str, port: int) -> list[str]:
    return [
        "apiVersion: apps/v1",
        "kind: Deployment",
        "metadata:",
        f"  name: {name}",
        "spec:",
        "  replicas: 1",
        "  selector:",
        "    matchLabels:",
        f"      app: {name}",
        "  template:",
        "    metadata:",
        "      labels:",
        f"        app: {name}",
        "    spec:",
        "      containers:",
        f"        - name: {name}",
        f"          image: {image}",
        f"          args: [\"--port\", \"{port}\"]",
        "          ports:",
        f"            - containerPort: {port}",
        "          livenessProbe:",
        "            httpGet:",
        "              path: /healthz",
        f"              port: {port}",
        "---",
        "apiVersion: v1",
        "kind: Service",
        "metadata:",
        f"  name: {name}",
        "spec:",
        "  selector:",
        f"    app: {name}",
        "  ports:",
        f"    - port: {port}",
        f"      targetPort: {port}",
    ]


def generate_k8s(spec: FlowSpec) -> str:
    """Deployment + Service pair per node and for the gateway."""
    chunks: list[str] = []
    for node in spec.nodes:
        chunks += _k8s_pair(node.name, _image_for(node, spec.deploy.registry),
                            node.port)
        chunks.append("---")
    chunks += _k8s_pair(GATEWAY_NAME, _gateway_image(spec.deploy.registry),
                        spec.deploy.gateway_port)
    return "\n".join(chunks) + "\n"


def generate_launch(spec: FlowSpec) -> str:
    """Shell script: start every node with --port, wait for each /healthz,
    then start the gateway. Commands are overridable via environment."""
    lines = [
        "#!/bin/sh",
        "set -e",
        "",
        "wait_healthy() {",
        "  port=\"$1\"",
        "  until curl -sf \"http://127.0.0.1:$port/healthz\" >/dev/null 2>&1; do",
        "    sleep 0.2",
        "  done",
        "}",
        "",
    ]
    for node in spec.nodes:
        cmd = f"${{{node.name.upper()}_CMD:-{node.name}-node}}"
        lines.append(f"{cmd} --port {node.port} &")
        lines.append(f"wait_healthy {node.port}")
    port = spec.deploy.gateway_port
    lines.append(f"${{GATEWAY_CMD:-{GATEWAY_NAME}}} --port {port} &")
    lines.append(f"wait_healthy {port}")
    lines.append("")
    lines.append("wait")
    return "\n".join(lines) + "\n"
