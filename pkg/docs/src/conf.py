# Configuration file for the Sphinx documentation builder.
#
# Only the options sciml-priors changes from the Sphinx defaults are set here. See
# http://www.sphinx-doc.org/en/master/config for the full list.

import os
import sys

sys.path.insert(0, os.path.abspath("../../src"))

# -- Project information -----------------------------------------------------

project = "sciml-priors"
copyright = "2024, Andre Odendaal"  # pylint: disable=redefined-builtin
author = "Andre Odendaal"

version = "0.1.0"
release = "0.1.0"

# -- General configuration ---------------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.napoleon",
    "sphinx.ext.mathjax",
    "sphinx.ext.viewcode",
    "sphinx.ext.autosectionlabel",
    "sphinx_copybutton",
    "sphinx_new_tab_link",
    "recommonmark",
]

source_suffix = [".rst", ".md"]
master_doc = "index"
language = "en"
exclude_patterns = []
pygments_style = "sphinx"

# Google-style docstrings throughout the package
napoleon_google_docstring = True
napoleon_numpy_docstring = False
autodoc_mock_imports = ["ska_ser_logging"]

# -- Options for HTML output -------------------------------------------------

html_theme = "ska_ser_sphinx_theme"
html_context = {
    "display_github": True,
    "github_version": "master",
    "conf_py_path": "/docs/src/",
}
html_static_path = []
htmlhelp_basename = "scimlpriorsdoc"

# -- Options for manual page output ------------------------------------------

man_pages = [
    (master_doc, "sciml-priors", "sciml-priors Documentation", [author], 1),
]
