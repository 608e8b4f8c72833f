"""A realistic sequencing-study catalog with data for demos and tests.

One schema holds the experimental hierarchy (Study over Experiment over
Replicate over Specimen, with tissue terms attached through a binary
association), the other holds controlled vocabularies.  One column is
curator-only and the Study table carries a release-gated row policy, so
the same catalog demonstrates both model pruning and row filtering.
"""

from __future__ import annotations

from .model import Catalog, catalog_from_document
from .policy import ClientContext
from .storage import Database

CURATOR = ClientContext(id="curator-1", roles=frozenset({"curator"}))

IFRAME_PATTERN = (
    "::: iframe [Cell Browser]({{{Cellbrowser_URL}}}){width=1000 height=600}\n:::"
)
BULLET_PATTERN = "{{#$self}}- {{{.}}}\n{{/$self}}"


def catalog_document() -> dict:
    return {
        "owners": ["curator"],
        "acls": {"enumerate": ["*"]},
        "schemas": {
            "RNASeq": {
                "tables": {
                    "Study": {
                        "columns": [
                            {"name": "Title", "type": "text", "nullable": False},
                            {"name": "Summary", "type": "markdown", "nullable": True},
                            {
                                "name": "Curation_Status",
                                "type": "text",
                                "nullable": False,
                                "acls": {
                                    "enumerate": ["curator"],
                                    "select": ["curator"],
                                    "update": ["curator"],
                                },
                            },
                            {
                                "name": "Cellbrowser_URL",
                                "type": "text",
                                "nullable": True,
                                "annotations": {
                                    "tag:isrd.isi.edu,2016:column-display": {
                                        "detailed": {"markdown_pattern": IFRAME_PATTERN}
                                    }
                                },
                            },
                        ],
                        "keys": [],
                        "foreign_keys": [
                            {
                                "name": ["RNASeq", "Study_Curation_Status_fkey"],
                                "from_columns": ["Curation_Status"],
                                "to": {
                                    "schema": "Vocab",
                                    "table": "Curation_Status",
                                    "columns": ["Name"],
                                },
                            }
                        ],
                        "acls": {
                            "select": ["*"],
                            "insert": ["curator"],
                            "update": ["curator"],
                            "delete": ["curator"],
                        },
                        "row_policy": {
                            "rules": [
                                {
                                    "roles": ["*"],
                                    "predicate": {
                                        "column": "Curation_Status",
                                        "in": ["Release"],
                                    },
                                },
                                {"roles": ["curator"]},
                            ]
                        },
                        "annotations": {
                            "tag:isrd.isi.edu,2016:table-display": {
                                "row_name": {
                                    "row_markdown_pattern": "{{{RID}}}: {{{Title}}}"
                                },
                            },
                            "tag:isrd.isi.edu,2019:source-definitions": {
                                "sources": {
                                    "experiment_types": {
                                        "source": [
                                            {
                                                "inbound": [
                                                    "RNASeq",
                                                    "Experiment_Study_fkey",
                                                ]
                                            },
                                            "Experiment_Type",
                                        ],
                                        "aggregate": "array_d",
                                        "markdown_name": "Experiment Types",
                                    },
                                    "anatomical_source": {
                                        "source": [
                                            {
                                                "inbound": [
                                                    "RNASeq",
                                                    "Experiment_Study_fkey",
                                                ]
                                            },
                                            {
                                                "inbound": [
                                                    "RNASeq",
                                                    "Replicate_Experiment_fkey",
                                                ]
                                            },
                                            {
                                                "outbound": [
                                                    "RNASeq",
                                                    "Replicate_Specimen_fkey",
                                                ]
                                            },
                                            {
                                                "inbound": [
                                                    "RNASeq",
                                                    "Specimen_Tissue_Specimen_fkey",
                                                ]
                                            },
                                            {
                                                "outbound": [
                                                    "RNASeq",
                                                    "Specimen_Tissue_Tissue_fkey",
                                                ]
                                            },
                                            "Name",
                                        ],
                                        "aggregate": "array_d",
                                        "markdown_name": "Specimen_Anatomical_Source",
                                    },
                                    "specimen_count": {
                                        "source": [
                                            {
                                                "inbound": [
                                                    "RNASeq",
                                                    "Experiment_Study_fkey",
                                                ]
                                            },
                                            {
                                                "inbound": [
                                                    "RNASeq",
                                                    "Replicate_Experiment_fkey",
                                                ]
                                            },
                                            {
                                                "outbound": [
                                                    "RNASeq",
                                                    "Replicate_Specimen_fkey",
                                                ]
                                            },
                                            "RID",
                                        ],
                                        "aggregate": "cnt_d",
                                        "markdown_name": "Specimens",
                                    },
                                }
                            },
                            "tag:isrd.isi.edu,2016:visible-columns": {
                                "compact": [
                                    "Title",
                                    {"sourcekey": "experiment_types"},
                                ],
                                "detailed": [
                                    "Title",
                                    "Summary",
                                    {
                                        "sourcekey": "anatomical_source",
                                        "display": {
                                            "markdown_pattern": BULLET_PATTERN
                                        },
                                    },
                                    {"sourcekey": "specimen_count"},
                                    "Cellbrowser_URL",
                                    "RCT",
                                    "RMT",
                                ],
                                "filter": [
                                    "Title",
                                    {"sourcekey": "anatomical_source"},
                                    {
                                        "source": [
                                            {
                                                "inbound": [
                                                    "RNASeq",
                                                    "Experiment_Study_fkey",
                                                ]
                                            },
                                            "Experiment_Type",
                                        ],
                                        "markdown_name": "Experiment Type",
                                    },
                                    {"source": "RCT", "kind": "range"},
                                ],
                            },
                            "tag:isrd.isi.edu,2016:visible-foreign-keys": {
                                "detailed": [
                                    ["RNASeq", "Experiment_Study_fkey"],
                                    {
                                        "source": [
                                            {
                                                "inbound": [
                                                    "RNASeq",
                                                    "Study_File_Study_fkey",
                                                ]
                                            },
                                            {
                                                "outbound": [
                                                    "RNASeq",
                                                    "Study_File_File_fkey",
                                                ]
                                            },
                                            "RID",
                                        ],
                                        "markdown_name": "Files",
                                    },
                                ]
                            },
                        },
                    },
                    "Experiment": {
                        "columns": [
                            {"name": "Name", "type": "text", "nullable": False},
                            {"name": "Study", "type": "text", "nullable": False},
                            {
                                "name": "Experiment_Type",
                                "type": "text",
                                "nullable": False,
                            },
                            {"name": "Protocol", "type": "text", "nullable": True},
                        ],
                        "keys": [{"columns": ["Name"]}],
                        "foreign_keys": [
                            {
                                "name": ["RNASeq", "Experiment_Study_fkey"],
                                "from_columns": ["Study"],
                                "to": {
                                    "schema": "RNASeq",
                                    "table": "Study",
                                    "columns": ["RID"],
                                },
                                "annotations": {
                                    "tag:isrd.isi.edu,2016:foreign-key": {
                                        "to_name": "Study",
                                        "from_name": "Experiments",
                                    }
                                },
                            },
                            {
                                "name": ["RNASeq", "Experiment_Protocol_fkey"],
                                "from_columns": ["Protocol"],
                                "to": {
                                    "schema": "Vocab",
                                    "table": "Protocol",
                                    "columns": ["Name"],
                                },
                                "annotations": {
                                    "tag:isrd.isi.edu,2016:foreign-key": {
                                        "selection_filter": [
                                            {
                                                "source": "Category",
                                                "choices": ["Purification"],
                                            }
                                        ]
                                    }
                                },
                            },
                        ],
                        "acls": {
                            "select": ["*"],
                            "insert": ["curator"],
                            "update": ["curator"],
                            "delete": ["curator"],
                        },
                        "annotations": {},
                    },
                    "Replicate": {
                        "columns": [
                            {"name": "Experiment", "type": "text", "nullable": False},
                            {"name": "Specimen", "type": "text", "nullable": False},
                            {"name": "Bio_Rep", "type": "int", "nullable": False},
                            {"name": "Tech_Rep", "type": "int", "nullable": False},
                        ],
                        "keys": [
                            {
                                "columns": [
                                    "Experiment",
                                    "Specimen",
                                    "Bio_Rep",
                                    "Tech_Rep",
                                ]
                            }
                        ],
                        "foreign_keys": [
                            {
                                "name": ["RNASeq", "Replicate_Experiment_fkey"],
                                "from_columns": ["Experiment"],
                                "to": {
                                    "schema": "RNASeq",
                                    "table": "Experiment",
                                    "columns": ["RID"],
                                },
                            },
                            {
                                "name": ["RNASeq", "Replicate_Specimen_fkey"],
                                "from_columns": ["Specimen"],
                                "to": {
                                    "schema": "RNASeq",
                                    "table": "Specimen",
                                    "columns": ["RID"],
                                },
                            },
                        ],
                        "acls": {
                            "select": ["*"],
                            "insert": ["curator"],
                            "update": ["curator"],
                            "delete": ["curator"],
                        },
                        "annotations": {},
                    },
                    "Specimen": {
                        "columns": [
                            {"name": "Species", "type": "text", "nullable": False},
                            {"name": "Stage", "type": "text", "nullable": True},
                        ],
                        "keys": [],
                        "foreign_keys": [],
                        "acls": {
                            "select": ["*"],
                            "insert": ["curator"],
                            "update": ["curator"],
                            "delete": ["curator"],
                        },
                        "annotations": {},
                    },
                    "Specimen_Tissue": {
                        "columns": [
                            {"name": "Specimen", "type": "text", "nullable": False},
                            {"name": "Tissue", "type": "text", "nullable": False},
                        ],
                        "keys": [{"columns": ["Specimen", "Tissue"]}],
                        "foreign_keys": [
                            {
                                "name": ["RNASeq", "Specimen_Tissue_Specimen_fkey"],
                                "from_columns": ["Specimen"],
                                "to": {
                                    "schema": "RNASeq",
                                    "table": "Specimen",
                                    "columns": ["RID"],
                                },
                            },
                            {
                                "name": ["RNASeq", "Specimen_Tissue_Tissue_fkey"],
                                "from_columns": ["Tissue"],
                                "to": {
                                    "schema": "Vocab",
                                    "table": "Tissue",
                                    "columns": ["Name"],
                                },
                            },
                        ],
                        "acls": {
                            "select": ["*"],
                            "insert": ["curator"],
                            "update": ["curator"],
                            "delete": ["curator"],
                        },
                        "annotations": {},
                    },
                    "File": {
                        "columns": [
                            {"name": "Filename", "type": "text", "nullable": False},
                            {
                                "name": "URL",
                                "type": "text",
                                "nullable": False,
                                "annotations": {
                                    "tag:isrd.isi.edu,2017:asset": {
                                        "filename_column": "Filename",
                                        "byte_count_column": "Bytes",
                                        "checksum_column": "MD5",
                                    }
                                },
                            },
                            {"name": "Bytes", "type": "int", "nullable": True},
                            {"name": "MD5", "type": "text", "nullable": True},
                            {"name": "Description", "type": "markdown", "nullable": True},
                        ],
                        "keys": [],
                        "foreign_keys": [],
                        "acls": {
                            "select": ["*"],
                            "insert": ["curator"],
                            "update": ["curator"],
                            "delete": ["curator"],
                        },
                        "annotations": {
                            "tag:isrd.isi.edu,2016:table-display": {
                                "row_name": {
                                    "row_markdown_pattern": "{{{Filename}}}"
                                }
                            }
                        },
                    },
                    "Study_File": {
                        "columns": [
                            {"name": "Study", "type": "text", "nullable": False},
                            {"name": "File", "type": "text", "nullable": False},
                        ],
                        "keys": [{"columns": ["Study", "File"]}],
                        "foreign_keys": [
                            {
                                "name": ["RNASeq", "Study_File_Study_fkey"],
                                "from_columns": ["Study"],
                                "to": {
                                    "schema": "RNASeq",
                                    "table": "Study",
                                    "columns": ["RID"],
                                },
                            },
                            {
                                "name": ["RNASeq", "Study_File_File_fkey"],
                                "from_columns": ["File"],
                                "to": {
                                    "schema": "RNASeq",
                                    "table": "File",
                                    "columns": ["RID"],
                                },
                            },
                        ],
                        "acls": {
                            "select": ["*"],
                            "insert": ["curator"],
                            "update": ["curator"],
                            "delete": ["curator"],
                        },
                        "annotations": {},
                    },
                }
            },
            "Vocab": {
                "tables": {
                    "Curation_Status": {
                        "columns": [
                            {"name": "Name", "type": "text", "nullable": False},
                            {"name": "Description", "type": "text", "nullable": True},
                        ],
                        "keys": [{"columns": ["Name"]}],
                        "foreign_keys": [],
                        "acls": {"select": ["*"], "insert": ["curator"]},
                        "annotations": {},
                    },
                    "Tissue": {
                        "columns": [
                            {"name": "Name", "type": "text", "nullable": False},
                            {"name": "Description", "type": "text", "nullable": True},
                        ],
                        "keys": [{"columns": ["Name"]}],
                        "foreign_keys": [],
                        "acls": {"select": ["*"], "insert": ["curator"]},
                        "annotations": {},
                    },
                    "Protocol": {
                        "columns": [
                            {"name": "Name", "type": "text", "nullable": False},
                            {"name": "Category", "type": "text", "nullable": False},
                        ],
                        "keys": [{"columns": ["Name"]}],
                        "foreign_keys": [],
                        "acls": {"select": ["*"], "insert": ["curator"]},
                        "annotations": {},
                    },
                }
            },
        },
    }


def build_catalog() -> Catalog:
    return catalog_from_document(catalog_document())


STUDIES = [
    ("Kidney development atlas", "Release", "Single-cell profiles of the developing kidney.", "https://cellbrowser.example.org/kidney"),
    ("Ureter obstruction time course", "Release", "Bulk profiling after obstruction at *E16.5*.", None),
    ("Bladder urothelium survey", "Release", None, None),
    ("Gonad differentiation map", "Release", "Covers both XX and XY gonads.", None),
    ("Embryonic heart pilot", "In preparation", None, None),
    ("Adult kidney aging cohort", "In preparation", "Longitudinal design.", None),
    ("Lower tract integration", "PI review", None, None),
    ("Nephron progenitor niche", "Biocurator review", "Niche signaling study.", None),
]

TISSUES = ["Kidney", "Ureter", "Bladder", "Gonad", "Heart"]

PROTOCOLS = [
    ("Magnetic bead cleanup", "Purification"),
    ("Column purification", "Purification"),
    ("Sucrose gradient", "Purification"),
    ("Paired-end sequencing", "Sequencing"),
    ("Single-cell droplet", "Sequencing"),
    ("Light sheet imaging", "Imaging"),
]

SPECIMENS = [
    ("Mouse", "E14.5", ["Kidney"]),
    ("Mouse", "E16.5", ["Kidney", "Ureter"]),
    ("Mouse", "P0", ["Ureter"]),
    ("Mouse", "Adult", ["Kidney"]),
    ("Human", "Adult", ["Kidney", "Bladder"]),
    ("Human", "Adult", ["Bladder"]),
    ("Mouse", "E13.5", ["Gonad"]),
    ("Human", None, ["Gonad"]),
    ("Mouse", "E11.5", ["Heart"]),
    ("Mouse", "Adult", ["Heart", "Kidney"]),
    ("Human", "Adult", ["Ureter"]),
    ("Mouse", None, ["Bladder"]),
]

# per study: list of (experiment type, protocol index or None, specimen indexes)
EXPERIMENTS = {
    0: [("scRNA-Seq", 0, [0, 1]), ("RNA-Seq", 3, [3]), ("ATAC-Seq", None, [0])],
    1: [("RNA-Seq", 1, [1, 2]), ("RNA-Seq", None, [10])],
    2: [("scRNA-Seq", 4, [4, 5]), ("RNA-Seq", 1, [11])],
    3: [("RNA-Seq", 2, [6, 7])],
    4: [("scRNA-Seq", 4, [8])],
    5: [("RNA-Seq", 0, [3, 9])],
    6: [("ATAC-Seq", None, [2, 5])],
    7: [],
}

FILES = [
    ("kidney_counts.h5ad", 73400320, "Processed count matrix."),
    ("kidney_qc.pdf", 1048576, None),
    ("ureter_counts.tsv", 5242880, "Raw counts, tab separated."),
    ("bladder_counts.h5ad", 31457280, None),
    ("gonad_counts.h5ad", 26214400, None),
    ("atlas_figures.zip", 157286400, "Supplementary figures."),
]

STUDY_FILES = [(0, 0), (0, 1), (0, 5), (1, 2), (2, 3), (3, 4)]


def populate(db: Database) -> dict[str, list[str]]:
    """Insert the fixture rows through the normal write path; returns the
    inserted RIDs per table for tests that need stable references."""
    rids: dict[str, list[str]] = {}

    rows = db.insert(
        "Vocab", "Curation_Status",
        [
            {"Name": "In preparation", "Description": "Being drafted"},
            {"Name": "PI review", "Description": "Awaiting PI signoff"},
            {"Name": "Biocurator review", "Description": "Under curation"},
            {"Name": "Release", "Description": "Publicly visible"},
        ],
        CURATOR,
    )
    rids["Vocab:Curation_Status"] = [r["RID"] for r in rows]

    rows = db.insert("Vocab", "Tissue", [{"Name": n} for n in TISSUES], CURATOR)
    rids["Vocab:Tissue"] = [r["RID"] for r in rows]

    rows = db.insert(
        "Vocab", "Protocol", [{"Name": n, "Category": c} for n, c in PROTOCOLS], CURATOR
    )
    rids["Vocab:Protocol"] = [r["RID"] for r in rows]

    # One call per study so each carries a distinct timestamp, then a
    # couple of later edits so modification order differs from creation
    # order: sorting by RMT is then observably different from RID order.
    study_rids = []
    for t, s, m, u in STUDIES:
        row = db.insert(
            "RNASeq", "Study",
            [{"Title": t, "Curation_Status": s, "Summary": m, "Cellbrowser_URL": u}],
            CURATOR,
        )[0]
        study_rids.append(row["RID"])
    db.update("RNASeq", "Study", [study_rids[3]], {"Summary": STUDIES[3][2]}, CURATOR)
    db.update("RNASeq", "Study", [study_rids[0]], {"Summary": STUDIES[0][2]}, CURATOR)
    rids["RNASeq:Study"] = study_rids

    rows = db.insert(
        "RNASeq", "Specimen",
        [{"Species": sp, "Stage": st} for sp, st, _ in SPECIMENS],
        CURATOR,
    )
    specimen_rids = [r["RID"] for r in rows]
    rids["RNASeq:Specimen"] = specimen_rids

    assoc = [
        {"Specimen": specimen_rids[i], "Tissue": tissue}
        for i, (_, _, tissues) in enumerate(SPECIMENS)
        for tissue in tissues
    ]
    rows = db.insert("RNASeq", "Specimen_Tissue", assoc, CURATOR)
    rids["RNASeq:Specimen_Tissue"] = [r["RID"] for r in rows]

    experiment_rids: list[str] = []
    replicates = []
    for study_idx, specs in EXPERIMENTS.items():
        for n, (etype, proto_idx, specimen_idxs) in enumerate(specs, start=1):
            row = db.insert(
                "RNASeq", "Experiment",
                [
                    {
                        "Name": f"{etype} {study_idx + 1}.{n}",
                        "Study": study_rids[study_idx],
                        "Experiment_Type": etype,
                        "Protocol": PROTOCOLS[proto_idx][0] if proto_idx is not None else None,
                    }
                ],
                CURATOR,
            )[0]
            experiment_rids.append(row["RID"])
            for rep_n, specimen_idx in enumerate(specimen_idxs, start=1):
                replicates.append(
                    {
                        "Experiment": row["RID"],
                        "Specimen": specimen_rids[specimen_idx],
                        "Bio_Rep": rep_n,
                        "Tech_Rep": 1,
                    }
                )
    rids["RNASeq:Experiment"] = experiment_rids
    rows = db.insert("RNASeq", "Replicate", replicates, CURATOR)
    rids["RNASeq:Replicate"] = [r["RID"] for r in rows]

    rows = db.insert(
        "RNASeq", "File",
        [
            {
                "Filename": name,
                "URL": f"https://assets.example.org/{name}",
                "Bytes": size,
                "MD5": None,
                "Description": desc,
            }
            for name, size, desc in FILES
        ],
        CURATOR,
    )
    file_rids = [r["RID"] for r in rows]
    rids["RNASeq:File"] = file_rids

    rows = db.insert(
        "RNASeq", "Study_File",
        [
            {"Study": study_rids[s], "File": file_rids[f]}
            for s, f in STUDY_FILES
        ],
        CURATOR,
    )
    rids["RNASeq:Study_File"] = [r["RID"] for r in rows]
    return rids


def build(data_dir=None) -> Database:
    db = Database(build_catalog(), data_dir)
    if not any(db.snapshot.tables.values()):
        populate(db)
    return db
