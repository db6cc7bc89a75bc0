"""Chain access: client seam, in-memory mock chain, redeploy detection.

Only the mock backend is implemented; ChainClient is the seam where a real
node RPC would attach.  The mock supports deploy, selfdestruct, and CREATE2
deploy so that the address-reuse attack (destroy, then place different code
at the same address) can be reproduced and detected.
"""

from __future__ import annotations

import json
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from ._keccak import keccak256
from .bytecode import code_hash, parse_hex, render_hex
from .errors import AddressOccupiedError, BackendUnavailableError, NotFoundError


def create2_address(deployer: bytes, salt: bytes, init_code: bytes) -> bytes:
    """EVM CREATE2 address: keccak(0xff ++ deployer ++ salt ++ keccak(init))[12:]."""
    if len(deployer) != 20:
        raise ValueError(f"deployer must be 20 bytes, got {len(deployer)}")
    if len(salt) != 32:
        raise ValueError(f"salt must be 32 bytes, got {len(salt)}")
    preimage = b"\xff" + deployer + salt + keccak256(init_code)
    return keccak256(preimage)[12:]


class RedeployStatus(Enum):
    UNCHANGED = "unchanged"
    CHANGED = "changed"
    DESTROYED = "destroyed"
    NEVER_SEEN = "never-seen"


@dataclass(frozen=True)
class CreationTx:
    hash: bytes
    input: bytes
    deployer: bytes


@dataclass
class ChainContract:
    address: bytes
    runtime_code: bytes
    creations: list[CreationTx] = field(default_factory=list)
    destroyed: bool = False


class ChainClient(ABC):
    @abstractmethod
    def get_runtime_code(self, address: bytes) -> bytes:
        """Current code; empty when absent or destroyed."""

    @abstractmethod
    def get_creation_input(self, address: bytes) -> tuple[bytes, bytes, bytes]:
        """(tx_hash, input, deployer) of the most recent creation."""


class MockChain(ChainClient):
    """Deterministic in-memory chain.

    Mutators are serialized under a lock; reads are safe between mutations.
    Setting reorg_in_progress makes all reads fail with BackendUnavailable
    until cleared (the only reorg behaviour modeled).
    """

    def __init__(self) -> None:
        self._contracts: dict[bytes, ChainContract] = {}
        self._lock = threading.Lock()
        self._sequence = 0
        self.reorg_in_progress = False

    def _available(self) -> None:
        if self.reorg_in_progress:
            raise BackendUnavailableError("chain reorganization in progress")

    def get_runtime_code(self, address: bytes) -> bytes:
        self._available()
        contract = self._contracts.get(address)
        if contract is None or contract.destroyed:
            return b""
        return contract.runtime_code

    def get_creation_input(self, address: bytes) -> tuple[bytes, bytes, bytes]:
        self._available()
        contract = self._contracts.get(address)
        if contract is None or not contract.creations:
            raise NotFoundError(f"no creation recorded for 0x{address.hex()}")
        tx = contract.creations[-1]
        return tx.hash, tx.input, tx.deployer

    def _next_tx_hash(self, address: bytes) -> bytes:
        self._sequence += 1
        return keccak256(b"txn" + self._sequence.to_bytes(8, "big") + address)

    def _place(self, address: bytes, runtime: bytes, creation_input: bytes,
               deployer: bytes) -> bytes:
        existing = self._contracts.get(address)
        if existing is not None and not existing.destroyed:
            raise AddressOccupiedError(f"0x{address.hex()} has live code")
        tx = CreationTx(self._next_tx_hash(address), creation_input, deployer)
        if existing is None:
            self._contracts[address] = ChainContract(address, runtime, [tx])
        else:
            existing.runtime_code = runtime
            existing.creations.append(tx)
            existing.destroyed = False
        return address

    def mock_deploy(self, runtime: bytes, creation_input: bytes,
                    deployer: bytes = bytes(20),
                    address: bytes | None = None) -> bytes:
        with self._lock:
            if address is None:
                self._sequence += 1
                address = keccak256(
                    b"deploy" + deployer + self._sequence.to_bytes(8, "big"))[12:]
            return self._place(address, runtime, creation_input, deployer)

    def mock_selfdestruct(self, address: bytes) -> None:
        with self._lock:
            contract = self._contracts.get(address)
            if contract is None or contract.destroyed:
                raise NotFoundError(f"0x{address.hex()} has no live code")
            contract.destroyed = True

    def mock_create2_deploy(self, deployer: bytes, salt: bytes, init_code: bytes,
                            runtime: bytes,
                            creation_input: bytes | None = None) -> bytes:
        """Place runtime at the CREATE2-derived address.

        Mirrors the factory pattern where init code is fixed and the deployed
        runtime is data-driven, so the same (deployer, salt, init) triple can
        revive a destroyed address with arbitrary new code.
        """
        with self._lock:
            address = create2_address(deployer, salt, init_code)
            return self._place(address, runtime,
                               init_code if creation_input is None else creation_input,
                               deployer)

    def save_fixture(self, path: str | Path) -> None:
        payload = {}
        for address, contract in sorted(self._contracts.items()):
            latest = contract.creations[-1] if contract.creations else None
            payload[render_hex(address)] = {
                "runtimeCode": render_hex(contract.runtime_code),
                "creationTx": None if latest is None else {
                    "hash": render_hex(latest.hash),
                    "input": render_hex(latest.input),
                    "deployer": render_hex(latest.deployer),
                },
                "destroyed": contract.destroyed,
            }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")

    @classmethod
    def load_fixture(cls, path: str | Path) -> "MockChain":
        chain = cls()
        payload = json.loads(Path(path).read_text())
        for address_hex, entry in payload.items():
            address = parse_hex(address_hex)
            creations = []
            tx = entry.get("creationTx")
            if tx:
                creations.append(CreationTx(
                    parse_hex(tx["hash"]), parse_hex(tx["input"]),
                    parse_hex(tx["deployer"])))
            chain._contracts[address] = ChainContract(
                address=address,
                runtime_code=parse_hex(entry.get("runtimeCode", "0x")),
                creations=creations,
                destroyed=bool(entry.get("destroyed", False)),
            )
        return chain


def detect_redeployment(client: ChainClient, address: bytes,
                        recorded_hash: bytes) -> RedeployStatus:
    """Compare the address's current code hash with the recorded one."""
    current = client.get_runtime_code(address)
    if not current:
        try:
            client.get_creation_input(address)
        except NotFoundError:
            return RedeployStatus.NEVER_SEEN
        return RedeployStatus.DESTROYED
    if code_hash(current) == recorded_hash:
        return RedeployStatus.UNCHANGED
    return RedeployStatus.CHANGED
