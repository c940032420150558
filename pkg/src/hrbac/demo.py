"""Standard demo corpus: a small org with a role hierarchy, a few users,
bulk public documents, and one small confidential record.

Sized so the private plane stays well below the public plane, matching
the intended deployment split.
"""

from __future__ import annotations

import os

from .gateway import Gateway, SessionContext
from .policy import Action, Permission, UserKind
from .stores import Classification

PUBLIC_FILE_SIZES = (256 * 1024, 192 * 1024, 128 * 1024, 64 * 1024)
CONFIDENTIAL_FILE_SIZE = 4 * 1024


def build_demo(gateway: Gateway, admin_ctx: SessionContext) -> dict:
    """Provision roles, users, and resources; returns ids and tokens."""
    now = admin_ctx.now
    engineer = gateway.add_role(admin_ctx, "Engineer")
    manager = gateway.add_role(admin_ctx, "Manager", juniors=[engineer])
    auditor = gateway.add_role(admin_ctx, "Auditor")
    gateway.ensure_role_key(admin_ctx, engineer)
    gateway.ensure_role_key(admin_ctx, manager)
    gateway.ensure_role_key(admin_ctx, auditor)
    gateway.add_sod_constraint(admin_ctx, auditor, manager)

    tokens = {
        "owner": gateway.create_user(admin_ctx, "owner", UserKind.DATA_OWNER),
        "alice": gateway.create_user(admin_ctx, "alice", UserKind.END_USER),
        "bob": gateway.create_user(admin_ctx, "bob", UserKind.END_USER),
        "rescue": gateway.create_user(admin_ctx, "rescue", UserKind.OVERRIDE),
        "rolemgr": gateway.create_user(admin_ctx, "rolemgr", UserKind.ROLE_MANAGER),
    }
    rolemgr_ctx = SessionContext("rolemgr", tokens["rolemgr"], now)
    gateway.assign_role(rolemgr_ctx, "alice", manager)
    gateway.assign_role(rolemgr_ctx, "bob", engineer)

    owner_ctx = SessionContext("owner", tokens["owner"], now)
    resources = []
    for i, size in enumerate(PUBLIC_FILE_SIZES):
        rid = f"report-{i}"
        gateway.upload(owner_ctx, rid, os.urandom(size), Classification.PUBLIC, [engineer])
        resources.append(rid)
    gateway.upload(
        owner_ctx,
        "salaries",
        os.urandom(CONFIDENTIAL_FILE_SIZE),
        Classification.CONFIDENTIAL,
        [manager],
    )
    resources.append("salaries")
    gateway.grant_permission(
        admin_ctx, auditor, Permission("report-*", Action.READ)
    )
    return {
        "roles": {"engineer": engineer, "manager": manager, "auditor": auditor},
        "tokens": tokens,
        "resources": resources,
    }
