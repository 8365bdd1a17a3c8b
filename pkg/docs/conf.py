#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# nmqubit documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import os
import sys

sys.path.insert(0, os.path.abspath(os.path.join("..", "src")))

import sphinx_rtd_theme  # noqa: E402

import nmqubit  # noqa: E402

# -- General configuration ------------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.todo",
    "sphinx.ext.coverage",
    "sphinx.ext.mathjax",
    "sphinx.ext.viewcode",
    "sphinx.ext.intersphinx",
    "sphinx.ext.napoleon",
    "sphinx.ext.autosummary",
    "m2r2",
]

templates_path = ["_templates"]

source_suffix = [".rst", ".md"]

autosummary_generate = True
autodoc_member_order = "bysource"

master_doc = "index"

project = "nmqubit"
copyright = "2024, Jan Freyberg"
author = "Jan Freyberg"

release = version = nmqubit.__version__

language = "en"

exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]

pygments_style = "sphinx"

todo_include_todos = True

# -- Options for HTML output ----------------------------------------------

html_theme = "sphinx_rtd_theme"
html_theme_path = [sphinx_rtd_theme.get_html_theme_path()]

htmlhelp_basename = "nmqubitdoc"

# -- Options for LaTeX output ---------------------------------------------

latex_documents = [
    (
        master_doc,
        "nmqubit.tex",
        "nmqubit Documentation",
        "Jan Freyberg",
        "manual",
    )
]

man_pages = [(master_doc, "nmqubit", "nmqubit Documentation", [author], 1)]

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
    "scipy": ("https://docs.scipy.org/doc/scipy/", None),
    "traitlets": ("https://traitlets.readthedocs.io/en/stable/", None),
}
