"""ecogauge: a local eco-feedback gateway for LLM chat usage.

Observes chat traffic (webhook or reverse proxy), converts each detected
query into energy/water footprint totals and a 0-100 Eco Score, decides
when the limit popup fires, and persists an append-only de-identified
event log from which all state can be rebuilt.
"""

__version__ = "0.1.0"
