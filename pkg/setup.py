#!/usr/bin/env python
#-*- encoding: utf-8 -*-
import io
import re
from os import path

from setuptools import setup, find_packages


def read(fname, **kwargs):
    return io.open(path.join(path.dirname(__file__), fname),
                   encoding=kwargs.get('encoding', 'utf8')).read()


setup(
    name='elexpress',
    version='0.3.1',
    license='MIT',
    description='Expressivity of emergent languages in signalling games',
    long_description='%s\n%s' % (read('README.rst'),
                                 re.sub(':[a-z]+:`~?(.*?)`',
                                        r'``\1``', read('CHANGELOG.rst'))),
    author='elexpress developers',
    packages=find_packages(),
    package_data={'elexpress': ['published/*.txt', 'tests/test_data/*']},
    include_package_data=True,
    zip_safe=False,
    python_requires='>=3.8',
    classifiers=[
        # complete classifier list:
        #   http://pypi.python.org/pypi?%3Aaction=list_classifiers
        'Development Status :: 4 - Beta',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: Implementation :: CPython',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
    ],
    keywords=[
        'emergent communication',
        'emergent language',
        'signalling game',
        'referential game',
        'expressivity',
        'language transfer',
        'gumbel-softmax',
        'contrastive loss',
    ],
    install_requires=[
        'numpy',
        'torch>=2.0',
        'scipy',
        'matplotlib',
        'pyyaml',
    ],
    extras_require={'test': ['pytest'],
    },
    entry_points={
        'console_scripts': [
            'elexpress = elexpress.__main__:main',
        ]
    },
)
