"""
Logging utilities for the MOHSA toolkit.
Structured JSON-lines run log plus timing of named operations.
"""

import json
import time
from datetime import datetime
from typing import Dict, Any, List, Optional
from pathlib import Path

from config.settings import settings


class RunLogger:
    """Logger for actions, decisions, errors and metrics of one session."""

    def __init__(self, log_dir: Path = None, console: Optional[bool] = None):
        if log_dir is None:
            log_dir = settings.results_dir / "logs"

        self.log_dir = Path(log_dir)
        self.console = settings.log_console if console is None else console
        self.session_id = datetime.now().strftime("%Y%m%d_%H%M%S")
        self.log_file = self.log_dir / f"run_log_{self.session_id}.json"
        self.log_entries: List[Dict[str, Any]] = []

    def _emit(self, entry: Dict[str, Any], line: str):
        entry = {"timestamp": datetime.now().isoformat(), **entry, "session_id": self.session_id}
        self.log_entries.append(entry)
        self._write_log_entry(entry)
        if self.console:
            print(line)

    def log_action(self, component: str, action: str, details: str = ""):
        """Log an action."""
        self._emit({"type": "action", "component": component, "action": action, "details": details},
                   f"🔧 [{component}] {action}: {details}" if details else f"🔧 [{component}] {action}")

    def log_decision(self, component: str, decision: str, reasoning: str = ""):
        """Log a decision, e.g. a resolved config value."""
        self._emit({"type": "decision", "component": component, "decision": decision, "reasoning": reasoning},
                   f"🧠 [{component}] Decision: {decision} | Reason: {reasoning}")

    def log_error(self, component: str, error: str, context: str = ""):
        """Log an error."""
        self._emit({"type": "error", "component": component, "error": error, "context": context},
                   f"❌ [{component}] Error: {error} | Context: {context}")

    def log_metrics(self, component: str, values: Dict[str, Any]):
        """Log one metrics record."""
        summary = " ".join(f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}" for k, v in values.items())
        self._emit({"type": "metrics", "component": component, **values}, f"📈 [{component}] {summary}")

    def log_stage_completion(self, stage_name: str, duration: float, status: str = "success", details: str = ""):
        """Log stage completion."""
        status_emoji = "✅" if status == "success" else "❌"
        self._emit({"type": "stage_completion", "stage": stage_name, "duration_seconds": duration,
                    "status": status, "details": details},
                   f"{status_emoji} Stage [{stage_name}] completed in {duration:.2f}s: {details}")

    def _write_log_entry(self, entry: Dict[str, Any]):
        """Append a log entry to the session file."""
        try:
            self.log_dir.mkdir(parents=True, exist_ok=True)
            with open(self.log_file, 'a', encoding='utf-8') as f:
                f.write(json.dumps(entry, ensure_ascii=False) + '\n')
        except OSError as e:
            if self.console:
                print(f"⚠️ Failed to write log entry: {e}")

    def get_session_summary(self) -> Dict[str, Any]:
        """Get summary of current session."""
        counts = {}
        for entry in self.log_entries:
            counts[entry["type"]] = counts.get(entry["type"], 0) + 1

        return {
            "session_id": self.session_id,
            "total_entries": len(self.log_entries),
            "actions_count": counts.get("action", 0),
            "decisions_count": counts.get("decision", 0),
            "errors_count": counts.get("error", 0),
            "metrics_count": counts.get("metrics", 0),
            "stages_count": counts.get("stage_completion", 0),
            "components_involved": sorted({e["component"] for e in self.log_entries if e.get("component")}),
            "session_duration": self._calculate_session_duration(),
            "log_file": str(self.log_file)
        }

    def _calculate_session_duration(self) -> float:
        """Calculate session duration in seconds."""
        if not self.log_entries:
            return 0.0

        first_entry = datetime.fromisoformat(self.log_entries[0]["timestamp"])
        last_entry = datetime.fromisoformat(self.log_entries[-1]["timestamp"])

        return (last_entry - first_entry).total_seconds()


class PerformanceLogger:
    """Logger for performance metrics."""

    def __init__(self):
        self.metrics = {}
        self.start_times = {}

    def start_timer(self, operation_name: str):
        """Start timing an operation."""
        self.start_times[operation_name] = time.perf_counter()

    def end_timer(self, operation_name: str) -> float:
        """End timing an operation and return duration."""
        if operation_name not in self.start_times:
            return 0.0

        duration = time.perf_counter() - self.start_times.pop(operation_name)
        self.metrics.setdefault(operation_name, []).append(duration)
        return duration

    def get_average_duration(self, operation_name: str) -> float:
        """Get average duration for an operation."""
        durations = self.metrics.get(operation_name, [])
        return sum(durations) / len(durations) if durations else 0.0

    def get_performance_summary(self) -> Dict[str, Any]:
        """Get performance summary."""
        summary = {}

        for operation, durations in self.metrics.items():
            summary[operation] = {
                "count": len(durations),
                "total_duration": sum(durations),
                "average_duration": sum(durations) / len(durations),
                "min_duration": min(durations),
                "max_duration": max(durations)
            }

        return summary


# Global logger instances
run_logger = RunLogger()
performance_logger = PerformanceLogger()
