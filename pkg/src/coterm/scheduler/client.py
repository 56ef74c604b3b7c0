"""Clients for the scheduler: over HTTP, or directly onto a core.

Both flavors expose the same call surface so job controllers and the
simulator do not care whether the scheduler is remote.  Transport failures
surface as SchedulerUnreachableError; protocol refusals are re-raised as
the same exception types the core raises.
"""

from __future__ import annotations

from typing import Dict, List, Optional

import requests

from ..errors import (
    PROTOCOL_ERRORS,
    SchedulerError,
    SchedulerUnreachableError,
)
from .core import ClaimResponse, SchedulerCore, TaskStatus


class SchedulerClient:
    """Talks to a SchedulerService endpoint on behalf of one client id."""

    def __init__(self, base_url: str, client_id: str, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.client_id = client_id
        self.timeout = timeout
        self._session = requests.Session()

    def close(self):
        self._session.close()

    def _request(self, method: str, path: str, **kwargs) -> Dict:
        url = self.base_url + path
        try:
            response = self._session.request(method, url, timeout=self.timeout, **kwargs)
        except (requests.ConnectionError, requests.Timeout) as exc:
            raise SchedulerUnreachableError("%s %s: %s" % (method, url, exc)) from None
        try:
            body = response.json()
        except ValueError:
            body = {}
        if response.status_code >= 400:
            code = body.get("error", "scheduler_error")
            message = body.get("message", "HTTP %d" % response.status_code)
            raise PROTOCOL_ERRORS.get(code, SchedulerError)(message)
        return body

    def register_resource(
        self, resource_id: str, name: str, n_docs: int, granularity: str, uploader: str = ""
    ) -> Dict:
        return self._request(
            "POST",
            "/v1/resources",
            json={
                "resource_id": resource_id,
                "name": name,
                "n_docs": n_docs,
                "granularity": granularity,
                "uploader": uploader,
            },
        )

    def list_resources(self) -> List[Dict]:
        return self._request("GET", "/v1/resources")["resources"]

    def claim(
        self,
        resource_id: str,
        pair_key: str,
        case_mode: str,
        data_transfer: bool = True,
        include_keys: bool = False,
    ) -> ClaimResponse:
        body = self._request(
            "POST",
            "/v1/tasks/claim",
            json={
                "client_id": self.client_id,
                "resource_id": resource_id,
                "pair_key": pair_key,
                "case_mode": case_mode,
                "data_transfer": data_transfer,
                "include_keys": include_keys,
            },
        )
        return ClaimResponse(
            kind=body["kind"],
            task_id=body.get("task_id"),
            result=body.get("result"),
            recovered=bool(body.get("recovered", False)),
        )

    def status(self, resource_id: str, pair_key: str, case_mode: str) -> TaskStatus:
        body = self._request(
            "GET",
            "/v1/tasks/status",
            params={
                "resource_id": resource_id,
                "pair_key": pair_key,
                "case_mode": case_mode,
            },
        )
        return TaskStatus(
            status=body["status"],
            stale=bool(body.get("stale", False)),
            task_id=body.get("task_id"),
            result=body.get("result"),
        )

    def heartbeat(self, task_id: int) -> None:
        self._request(
            "POST", "/v1/tasks/%d/heartbeat" % task_id, json={"client_id": self.client_id}
        )

    def takeover(self, task_id: int) -> bool:
        body = self._request(
            "POST", "/v1/tasks/%d/takeover" % task_id, json={"client_id": self.client_id}
        )
        return bool(body.get("granted", False))

    def submit(self, task_id: int, result: Dict) -> str:
        body = self._request(
            "POST",
            "/v1/tasks/%d/result" % task_id,
            json={"client_id": self.client_id, "result": result},
        )
        return body["outcome"]


class LocalSchedulerClient:
    """Same surface as SchedulerClient, calling a core in-process."""

    def __init__(self, core: SchedulerCore, client_id: str):
        self.core = core
        self.client_id = client_id

    def close(self):
        pass

    def register_resource(
        self, resource_id: str, name: str, n_docs: int, granularity: str, uploader: str = ""
    ) -> Dict:
        entry = self.core.register_resource(resource_id, name, n_docs, granularity, uploader)
        return {
            "resource_id": entry.resource_id,
            "name": entry.name,
            "n_docs": entry.n_docs,
            "granularity": entry.granularity,
            "uploader": entry.uploader,
            "registered_at": entry.registered_at,
        }

    def list_resources(self) -> List[Dict]:
        return [
            {
                "resource_id": e.resource_id,
                "name": e.name,
                "n_docs": e.n_docs,
                "granularity": e.granularity,
                "uploader": e.uploader,
                "registered_at": e.registered_at,
            }
            for e in self.core.list_resources()
        ]

    def claim(
        self,
        resource_id: str,
        pair_key: str,
        case_mode: str,
        data_transfer: bool = True,
        include_keys: bool = False,
    ) -> ClaimResponse:
        return self.core.claim_task(
            self.client_id, resource_id, pair_key, case_mode, data_transfer, include_keys
        )

    def status(self, resource_id: str, pair_key: str, case_mode: str) -> TaskStatus:
        return self.core.task_status(resource_id, pair_key, case_mode)

    def heartbeat(self, task_id: int) -> None:
        self.core.heartbeat(task_id, self.client_id)

    def takeover(self, task_id: int) -> bool:
        return self.core.takeover(task_id, self.client_id)

    def submit(self, task_id: int, result: Dict) -> str:
        return self.core.submit_result(task_id, self.client_id, result)
