"""Deterministic simulator and forensics toolkit for a covert
transaction-embedded command-and-control protocol.

The package models a botnet that hides its traffic inside ordinary-looking
test-network transactions: commands ride in data-carrier outputs of
transactions from a botmaster to bots, responses ride back the same way,
and the relay policy differences between the main network and the test
network decide what the protocol can get away with.

Subpackages:

- txmodel: transaction serialization, sizes, txids, scripts, addresses
- relaypolicy: standardness rules for the two network profiles
- cryptoenvelope: hybrid RSA/AES envelope sealing and opening
- wireformat: command codec and transaction templates
- netsim: deterministic discrete-event network simulator
- actors: botmaster and bot state machines
- scenario: flat key=value scenario file parser
- costmodel: fee tables and campaign cost projection
- forensics: blockchain-only analysis of protocol traffic
- report: delimited reports and figures
- cli: command line entry point
"""

__version__ = "0.1.0"
