# Sphinx configuration of the coreseg API docs.

# -- Path setup --------------------------------------------------------------

import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join("..", "..")))

import re

with open(os.path.join("..", "..", "coreseg", "__init__.py")) as f:
    __version__ = re.search(r'__version__ = "(.+)"', f.read()).group(1)

# -- Project information -----------------------------------------------------

project = 'coreseg'
copyright = '2026, coreseg developers'
author = 'coreseg developers'

# The short X.Y version
version = '.'.join(__version__.split('.')[:2])
# The full version, including alpha/beta/rc tags
release = __version__

# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.coverage',
    'sphinx.ext.viewcode',
    'sphinx.ext.napoleon'
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'
language = 'en'
exclude_patterns = []
pygments_style = None

# Heavy imports are mocked so docs build without a torch install.
autodoc_mock_imports = ['torch', 'scipy', 'matplotlib', 'PIL', 'tqdm']

# -- Options for HTML output -------------------------------------------------

html_theme = 'sphinx_rtd_theme'
html_static_path = ['_static']
htmlhelp_basename = 'coresegdoc'
