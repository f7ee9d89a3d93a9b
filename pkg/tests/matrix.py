"""The principal x visibility x operation matrix, shared by unit and acceptance tests."""

from __future__ import annotations

from shareal.errors import NotAuthorized

from .oracles import oracle_can_administer, oracle_can_read

PRINCIPALS = ("admin", "owner", "member", "stranger")
VISIBILITIES = ("private", "shared", "public")
OPERATIONS = ("read", "update", "set_policy")


def run_access_matrix(svc, admin):
    """Runs all 36 cases; returns [(principal, visibility, op, allowed, expected)]."""
    owner = svc.catalog.register_user(admin, "mx-owner", "analyst", "pw")
    member = svc.catalog.register_user(admin, "mx-member", "analyst", "pw")
    stranger = svc.catalog.register_user(admin, "mx-stranger", "analyst", "pw")
    actors = {"admin": admin, "owner": owner, "member": member, "stranger": stranger}

    outcomes = []
    for visibility in VISIBILITIES:
        for principal in PRINCIPALS:
            ds = svc.catalog.create_dataset(
                owner, f"mx-{visibility}-{principal}", b"matrix-bytes"
            )
            if visibility != "private":
                members = [member.id] if visibility == "shared" else []
                svc.catalog.set_policy(owner, ds.id, visibility, members)
            actor = actors[principal]

            allowed = _attempt(lambda: svc.catalog.get_content(actor, ds.id))
            outcomes.append(
                (principal, visibility, "read", allowed, oracle_can_read(principal, visibility))
            )

            allowed = _attempt(
                lambda: svc.catalog.update_meta(actor, ds.id, {"description": "touched"})
            )
            outcomes.append(
                (principal, visibility, "update", allowed, oracle_can_administer(principal))
            )

            allowed = _attempt(
                lambda: svc.catalog.set_policy(
                    actor, ds.id, visibility, [member.id] if visibility == "shared" else []
                )
            )
            outcomes.append(
                (principal, visibility, "set_policy", allowed, oracle_can_administer(principal))
            )
    return outcomes


def _attempt(fn) -> bool:
    try:
        fn()
        return True
    except NotAuthorized:
        return False
