"""Declarative flow orchestration: IDL + flow-spec compilation into a running
pipeline of HTTP/JSON microservices, with a retrieve-and-read QA demo."""

__version__ = "0.1.0"
