# -*- coding: utf-8 -*-
#
# Sphinx configuration of the prototypal documentation.

import os
import sys

sys.path.insert(0, os.path.abspath('..'))

project = 'prototypal'
copyright = '2019, prototypal developers'
author = 'prototypal developers'
version = ''
release = ''

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.intersphinx',
    'sphinx.ext.mathjax',
    'sphinx.ext.viewcode',
    'sphinx.ext.napoleon',
]

source_suffix = '.rst'
master_doc = 'index'
exclude_patterns = ['.pytest_cache', '_build']
pygments_style = 'sphinx'

html_theme = 'sphinx_rtd_theme'
htmlhelp_basename = 'prototypaldoc'

intersphinx_mapping = {'python': ('https://docs.python.org/3', None),
                       'pandas': (
                           'http://pandas.pydata.org/pandas-docs/stable/',
                           None),
                       'scipy': ('https://docs.scipy.org/doc/scipy/reference/',
                                 None),
                       'numpy': ('https://docs.scipy.org/doc/numpy/', None)}

autodoc_default_flags = ['members', 'show-inheritance']


def autodoc_skip_member(app, what, name, obj, skip, options):
    return skip or name in ('__weakref__', '__doc__', '__module__',
                            '__dict__')


def setup(app):
    app.connect('autodoc-skip-member', autodoc_skip_member)
