"""Two storage planes: a public blob store for sealed public-classified
objects, and a private store holding everything sensitive: policy state,
role keys, resource metadata, confidential blobs, and the audit chain
head.

The public plane stores only SealedBlob bytes, never key material or
policy documents.  The private plane is one versioned JSON document
replaced atomically on save (temp file + fsync + rename), so a crash
between write and rename leaves the previous document intact.
"""

from __future__ import annotations

import base64
import json
import os
import re
import tempfile
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import requests

from .envelope import RoleKeyPair, WrappedKey, WRAP_SCHEME
from .errors import (
    BackendUnavailable,
    FormatError,
    IoError,
    NameInvalid,
    NotFound,
    UnsupportedVersion,
    ValidationError,
)
from .policy import PolicyEngine

DOC_VERSION = 1
PLANE_PUBLIC = "public"
PLANE_PRIVATE = "private"

_NAME_RE = re.compile(r"^[a-z0-9.-]{1,255}$")


def check_name(name: str) -> str:
    if not _NAME_RE.match(name or ""):
        raise NameInvalid(
            f"blob name must be 1-255 lowercase alphanumerics, dash, or dot: {name!r}"
        )
    return name


class Classification(Enum):
    PUBLIC = "Public"
    CONFIDENTIAL = "Confidential"


@dataclass(frozen=True)
class BlobRef:
    plane: str  # PLANE_PUBLIC or PLANE_PRIVATE
    name: str


# -- public plane backends ---------------------------------------------

class BlobStore(ABC):
    """Named blob storage; concurrent use on distinct names is safe,
    last writer wins on the same name."""

    @abstractmethod
    def put_blob(self, name: str, data: bytes) -> str:
        ...

    @abstractmethod
    def get_blob(self, name: str) -> bytes:
        ...

    @abstractmethod
    def delete_blob(self, name: str) -> None:
        ...

    @abstractmethod
    def names(self) -> list[str]:
        ...

    def total_bytes(self) -> int:
        return sum(len(self.get_blob(n)) for n in self.names())


class MemoryBlobStore(BlobStore):
    def __init__(self) -> None:
        self._blobs: dict[str, bytes] = {}

    def put_blob(self, name: str, data: bytes) -> str:
        check_name(name)
        self._blobs[name] = bytes(data)
        return name

    def get_blob(self, name: str) -> bytes:
        try:
            return self._blobs[name]
        except KeyError:
            raise NotFound(f"no such blob: {name}") from None

    def delete_blob(self, name: str) -> None:
        self._blobs.pop(name, None)

    def names(self) -> list[str]:
        return sorted(self._blobs)


class FilesystemBlobStore(BlobStore):
    """One file per blob under a directory; writes are tmp+rename atomic."""

    def __init__(self, directory: str) -> None:
        self._dir = directory
        os.makedirs(directory, exist_ok=True)

    def _path(self, name: str) -> str:
        return os.path.join(self._dir, check_name(name))

    def put_blob(self, name: str, data: bytes) -> str:
        path = self._path(name)
        try:
            fd, tmp = tempfile.mkstemp(dir=self._dir, prefix=".tmp-")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(data)
                    fh.flush()
                    os.fsync(fh.fileno())
                os.replace(tmp, path)
            finally:
                if os.path.exists(tmp):
                    os.unlink(tmp)
        except OSError as exc:
            raise BackendUnavailable(f"blob write failed: {exc}") from exc
        return name

    def get_blob(self, name: str) -> bytes:
        path = self._path(name)
        try:
            with open(path, "rb") as fh:
                return fh.read()
        except FileNotFoundError:
            raise NotFound(f"no such blob: {name}") from None
        except OSError as exc:
            raise BackendUnavailable(f"blob read failed: {exc}") from exc

    def delete_blob(self, name: str) -> None:
        try:
            os.unlink(self._path(name))
        except FileNotFoundError:
            pass
        except OSError as exc:
            raise BackendUnavailable(f"blob delete failed: {exc}") from exc

    def names(self) -> list[str]:
        return sorted(n for n in os.listdir(self._dir) if not n.startswith("."))


class RemoteBlobStore(BlobStore):
    """Client for the minimal object protocol: PUT/GET/DELETE
    /blobs/{name} with 200/404/503 semantics."""

    def __init__(self, base_url: str, timeout: float = 10.0) -> None:
        self._base = base_url.rstrip("/")
        self._timeout = timeout
        self._session = requests.Session()

    def _url(self, name: str) -> str:
        return f"{self._base}/blobs/{check_name(name)}"

    def put_blob(self, name: str, data: bytes) -> str:
        try:
            resp = self._session.put(self._url(name), data=data, timeout=self._timeout)
        except requests.RequestException as exc:
            raise BackendUnavailable(f"remote store unreachable, retry later: {exc}") from exc
        if resp.status_code != 200:
            raise BackendUnavailable(f"remote PUT returned {resp.status_code}, retry later")
        return name

    def get_blob(self, name: str) -> bytes:
        try:
            resp = self._session.get(self._url(name), timeout=self._timeout)
        except requests.RequestException as exc:
            raise BackendUnavailable(f"remote store unreachable, retry later: {exc}") from exc
        if resp.status_code == 404:
            raise NotFound(f"no such blob: {name}")
        if resp.status_code != 200:
            raise BackendUnavailable(f"remote GET returned {resp.status_code}, retry later")
        return resp.content

    def delete_blob(self, name: str) -> None:
        try:
            resp = self._session.delete(self._url(name), timeout=self._timeout)
        except requests.RequestException as exc:
            raise BackendUnavailable(f"remote store unreachable, retry later: {exc}") from exc
        if resp.status_code not in (200, 404):
            raise BackendUnavailable(f"remote DELETE returned {resp.status_code}, retry later")

    def names(self) -> list[str]:
        try:
            resp = self._session.get(f"{self._base}/blobs", timeout=self._timeout)
        except requests.RequestException as exc:
            raise BackendUnavailable(f"remote store unreachable, retry later: {exc}") from exc
        if resp.status_code != 200:
            raise BackendUnavailable(f"remote LIST returned {resp.status_code}, retry later")
        return sorted(resp.json())


# -- private plane -----------------------------------------------------

@dataclass
class ResourceMeta:
    resource_id: str
    owner: str
    classification: Classification
    blob_ref: BlobRef
    plaintext_sha256: str
    size_bytes: int
    version: int
    wrapped_keys: dict[str, WrappedKey]
    created_at: float


@dataclass
class PrivateState:
    """Full private-plane state: policy, resources, role keys, the
    confidential blob plane, and the audit chain head."""

    policy: PolicyEngine = field(default_factory=PolicyEngine)
    resources: dict[str, ResourceMeta] = field(default_factory=dict)
    role_keys: dict[str, RoleKeyPair] = field(default_factory=dict)
    blobs: dict[str, bytes] = field(default_factory=dict)
    audit_head: Optional[dict] = None

    def to_doc(self) -> dict:
        policy_state = self.policy.dump_state()
        return {
            "version": DOC_VERSION,
            "roles": policy_state["roles"],
            "users": policy_state["users"],
            "sod": policy_state["sod"],
            "delegations": policy_state["delegations"],
            "resources": {
                rid: {
                    "owner": m.owner,
                    "classification": m.classification.value,
                    "blob_ref": {"plane": m.blob_ref.plane, "name": m.blob_ref.name},
                    "plaintext_sha256": m.plaintext_sha256,
                    "size_bytes": m.size_bytes,
                    "version": m.version,
                    "wrapped_keys": {
                        role: {
                            "scheme": wk.scheme,
                            "ciphertext": base64.b64encode(wk.ciphertext).decode("ascii"),
                        }
                        for role, wk in sorted(m.wrapped_keys.items())
                    },
                    "created_at": m.created_at,
                }
                for rid, m in sorted(self.resources.items())
            },
            "role_keys": {
                role: {
                    "modulus_bits": kp.modulus_bits,
                    "private_pem": kp.private_pem(),
                }
                for role, kp in sorted(self.role_keys.items())
            },
            "audit_head": self.audit_head,
            "blobs": {
                name: base64.b64encode(data).decode("ascii")
                for name, data in sorted(self.blobs.items())
            },
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "PrivateState":
        try:
            policy = PolicyEngine.from_state(
                {
                    "roles": doc["roles"],
                    "users": doc["users"],
                    "sod": doc["sod"],
                    "delegations": doc["delegations"],
                }
            )
            resources = {
                rid: ResourceMeta(
                    resource_id=rid,
                    owner=m["owner"],
                    classification=Classification(m["classification"]),
                    blob_ref=BlobRef(m["blob_ref"]["plane"], m["blob_ref"]["name"]),
                    plaintext_sha256=m["plaintext_sha256"],
                    size_bytes=m["size_bytes"],
                    version=m["version"],
                    wrapped_keys={
                        role: WrappedKey(
                            role=role,
                            scheme=wk.get("scheme", WRAP_SCHEME),
                            ciphertext=base64.b64decode(wk["ciphertext"]),
                        )
                        for role, wk in m["wrapped_keys"].items()
                    },
                    created_at=m["created_at"],
                )
                for rid, m in doc["resources"].items()
            }
            role_keys = {
                role: RoleKeyPair.from_private_pem(role, rk["private_pem"])
                for role, rk in doc["role_keys"].items()
            }
            blobs = {
                name: base64.b64decode(b64) for name, b64 in doc["blobs"].items()
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed private document: {exc}") from None
        return cls(
            policy=policy,
            resources=resources,
            role_keys=role_keys,
            blobs=blobs,
            audit_head=doc.get("audit_head"),
        )

    # private-plane blob operations, mirroring the BlobStore surface
    def put_blob(self, name: str, data: bytes) -> str:
        check_name(name)
        self.blobs[name] = bytes(data)
        return name

    def get_blob(self, name: str) -> bytes:
        try:
            return self.blobs[name]
        except KeyError:
            raise NotFound(f"no such private blob: {name}") from None

    def delete_blob(self, name: str) -> None:
        self.blobs.pop(name, None)


def validate_state(state: PrivateState) -> None:
    """Reject documents violating structural invariants before any write."""
    engine = state.policy
    for role in engine.roles.values():
        for j in role.juniors:
            if j not in engine.roles:
                raise ValidationError(f"role {role.id} references unknown junior {j}")
    if not engine.is_acyclic():
        raise ValidationError("role hierarchy contains a cycle")
    for user in engine.users.values():
        for rid in user.roles:
            if rid not in engine.roles:
                raise ValidationError(f"user {user.id} assigned unknown role {rid}")
        closure = engine.closure_of(user.roles)
        conflict = engine.sod_conflict_in(closure)
        if conflict is not None:
            raise ValidationError(
                f"user {user.id} violates SoD constraint {conflict[0]}/{conflict[1]}"
            )
    for rid, meta in state.resources.items():
        # wrapped_keys is non-empty at creation (upload requires grant
        # roles) but may be emptied by revocation of the last role
        expected_plane = (
            PLANE_PRIVATE
            if meta.classification is Classification.CONFIDENTIAL
            else PLANE_PUBLIC
        )
        if meta.blob_ref.plane != expected_plane:
            raise ValidationError(
                f"resource {rid} ({meta.classification.value}) routed to "
                f"{meta.blob_ref.plane} plane"
            )
        if meta.blob_ref.plane == PLANE_PRIVATE and meta.blob_ref.name not in state.blobs:
            raise ValidationError(f"resource {rid} references missing private blob")
        for role in meta.wrapped_keys:
            if role not in engine.roles:
                raise ValidationError(f"resource {rid} wraps key for unknown role {role}")


def save_private(path: str, state: PrivateState) -> None:
    """Validate, then atomically replace the document on disk."""
    validate_state(state)
    payload = json.dumps(state.to_doc(), sort_keys=True, indent=1).encode("utf-8")
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".private-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(payload)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
    except OSError as exc:
        raise IoError(f"private store save failed: {exc}") from exc


def load_private(path: str) -> PrivateState:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except FileNotFoundError:
        raise NotFound(f"no private store at {path}") from None
    except OSError as exc:
        raise IoError(f"private store read failed: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise FormatError(f"private store is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or "version" not in doc:
        raise FormatError("private store document missing version field")
    if doc["version"] != DOC_VERSION:
        raise UnsupportedVersion(f"unsupported document version {doc['version']}")
    return PrivateState.from_doc(doc)
