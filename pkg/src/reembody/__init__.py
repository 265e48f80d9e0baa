"""Re-embodied conversational navigation.

A closed-domain guidance agent that walks users landmark-to-landmark and can
hand a live conversation off between a stationary robot and a wearable
without losing voice, transcript, or task progress.
"""

__version__ = "0.1.0"

from .model import (
    DeviceKind,
    DeviceProfile,
    DialoguePhase,
    DisplayMode,
    Intent,
    IntentKind,
    LatencyModel,
    SessionState,
    Speaker,
    Utterance,
    VoiceConfig,
    append_turn,
    new_session,
    session_from_json,
    session_to_json,
)
from .routes import (
    InstructionMode,
    RouteGraph,
    RoutePlan,
    Turn,
    default_campus_graph,
    load_route_graph,
    load_route_graph_file,
    plan_route,
    render_instruction,
)

__all__ = [
    "DeviceKind",
    "DeviceProfile",
    "DialoguePhase",
    "DisplayMode",
    "Intent",
    "IntentKind",
    "InstructionMode",
    "LatencyModel",
    "RouteGraph",
    "RoutePlan",
    "SessionState",
    "Speaker",
    "Turn",
    "Utterance",
    "VoiceConfig",
    "append_turn",
    "default_campus_graph",
    "load_route_graph",
    "load_route_graph_file",
    "new_session",
    "plan_route",
    "render_instruction",
    "session_from_json",
    "session_to_json",
    "__version__",
]
