"""Shared test helpers: dialogue builders, a scripted chat stand-in, fixture
authoring shortcuts, and the acceptance-summary terminal hook."""

from __future__ import annotations

import threading

import pytest

from rolesum.backends import ChatResponse, FixtureStore
from rolesum.corpus import AnnotatedExample, Dialogue, DialogueTurn

AMANDA_TURNS = (
    ("Amanda", "I baked cookies. Do you want some?"),
    ("Jerry", "Sure!"),
    ("Amanda", "I'll bring you tomorrow :-)"),
)
AMANDA_SUMMARY = "Amanda baked cookies and will bring Jerry some tomorrow."


def make_dialogue(did: str = "d1", turns=AMANDA_TURNS) -> Dialogue:
    return Dialogue(did, tuple(DialogueTurn(s, t) for s, t in turns))


def make_example(did: str = "d1", reference: str = AMANDA_SUMMARY, turns=AMANDA_TURNS,
                 trace=None) -> AnnotatedExample:
    return AnnotatedExample(make_dialogue(did, turns), reference, trace)


class ScriptedChat:
    """Replies from a queue in order, recording every request; when the queue
    runs dry it repeats `default` if set, else fails the test."""

    def __init__(self, replies=(), default: str | None = None):
        self.replies = list(replies)
        self.default = default
        self.requests = []
        self._lock = threading.Lock()

    def chat(self, request) -> ChatResponse:
        with self._lock:
            self.requests.append(request)
            if self.replies:
                reply = self.replies.pop(0)
            elif self.default is not None:
                reply = self.default
            else:
                raise AssertionError("scripted chat ran out of replies")
        if isinstance(reply, Exception):
            raise reply
        return ChatResponse(content=reply)

    @property
    def calls(self) -> int:
        return len(self.requests)


def put_chat_fixture(root, request, content: str) -> None:
    FixtureStore(root).put("chat", request.to_payload(), {"content": content})


@pytest.fixture
def fixtures_dir(tmp_path):
    root = tmp_path / "fixtures"
    root.mkdir()
    return root


# ---------------------------------------------------------------------------
# acceptance summary: one line per acceptance check at the end of the run

_acceptance_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        _acceptance_outcomes[name] = report.outcome
    elif report.when == "setup" and report.outcome != "passed":
        _acceptance_outcomes[name] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_outcomes:
        return
    terminalreporter.section("acceptance checks")
    for name in sorted(_acceptance_outcomes):
        outcome = _acceptance_outcomes[name]
        label = {"passed": "PASS", "skipped": "SKIP"}.get(outcome, "FAIL")
        terminalreporter.write_line(f"{label}  {name}")
